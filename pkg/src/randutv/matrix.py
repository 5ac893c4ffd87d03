"""Dense matrix storage, block tiling, reproducible Gaussian draws and gemm.

Matrices are plain ``float64`` numpy arrays kept in column-major (Fortran)
order, so the element (r, c) of an m-by-n matrix lives at offset ``r + c*m``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import kernel
from .errors import ShapeError

EPS = np.finfo(np.float64).eps


def zeros(m: int, n: int) -> np.ndarray:
    return np.zeros((m, n), dtype=np.float64, order="F")


def eye(n: int) -> np.ndarray:
    return np.asfortranarray(np.eye(n, dtype=np.float64))


def as_matrix(x, copy: bool = True) -> np.ndarray:
    """Coerce `x` into a 2-D column-major float64 array with finite entries."""
    a = np.array(x, dtype=np.float64, order="F", copy=copy, ndmin=2)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {a.ndim} dimensions")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf")
    return a


# ---------------------------------------------------------------------------
# gemm: per output element the products are summed with k ascending, starting
# from 0.0, then C <- alpha*sum + beta*C (beta == 0 ignores C entirely). Both
# backends follow this order exactly, so results are bit-identical to a naive
# triple loop and to each other.

def _gemm_numpy(alpha, A, transb, B, beta, C):
    m, n = C.shape
    Bop = B.T if transb else B
    acc = np.zeros((m, n))
    tmp = np.empty((m, n))
    for p in range(A.shape[1]):
        np.multiply(A[:, p, None], Bop[None, p, :], out=tmp)
        acc += tmp
    if beta == 0.0:
        C[...] = alpha * acc
    else:
        C[...] = alpha * acc + beta * C


@kernel(_gemm_numpy)
def _gemm(alpha, A, transb, B, beta, C):
    m, n = C.shape
    k = A.shape[1]
    acc = np.empty(m)
    for j in range(n):
        for i in range(m):
            acc[i] = 0.0
        for p in range(k):
            if transb:
                bpj = B[j, p]
            else:
                bpj = B[p, j]
            for i in range(m):
                acc[i] += A[i, p] * bpj
        if beta == 0.0:
            for i in range(m):
                C[i, j] = alpha * acc[i]
        else:
            for i in range(m):
                C[i, j] = alpha * acc[i] + beta * C[i, j]


def gemm(alpha, transa, A, transb, B, beta, C):
    """C <- alpha*op(A)*op(B) + beta*C in place; returns C.

    ``transa``/``transb`` select the transpose of the operand. The
    accumulation order is fixed (see module notes), so the result is
    reproducible bit for bit regardless of the calling thread.
    """
    ar, ac = (A.shape[1], A.shape[0]) if transa else A.shape
    br, bc = (B.shape[1], B.shape[0]) if transb else B.shape
    if ac != br or C.shape != (ar, bc):
        raise ShapeError(
            f"gemm: op(A) {ar}x{ac}, op(B) {br}x{bc}, C {C.shape[0]}x{C.shape[1]}")
    if C.size == 0:
        return C
    # the kernel streams down columns of op(A); give it a contiguous copy
    Aop = np.asfortranarray(A.T if transa else A)
    _gemm(float(alpha), Aop, bool(transb), B, float(beta), C)
    return C


def matmul(A, B, transa=False, transb=False):
    """Fresh op(A)*op(B) through the deterministic gemm."""
    m = A.shape[1] if transa else A.shape[0]
    n = B.shape[0] if transb else B.shape[1]
    return gemm(1.0, transa, A, transb, B, 0.0, zeros(m, n))


# ---------------------------------------------------------------------------
# Gaussian generation: SplitMix64 over a counter gives the uniforms, and
# Box-Muller turns uniform pair k into deviates 2k (cosine) and 2k+1 (sine).
# Any deviate can therefore be produced from its stream position alone.

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(seed: int, counters: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + (counters + np.uint64(1)) * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _uniform(seed: int, counters: np.ndarray) -> np.ndarray:
    # (0, 1]: never zero, so log() below is safe
    bits = _splitmix64(seed, counters) >> np.uint64(11)
    return (bits.astype(np.float64) + 1.0) * 2.0**-53


def normal_at(seed: int, positions) -> np.ndarray:
    """Standard normal deviates at the given absolute stream positions."""
    pos = np.asarray(positions, dtype=np.uint64)
    pair = pos >> np.uint64(1)
    u1 = _uniform(seed, pair * np.uint64(2))
    u2 = _uniform(seed, pair * np.uint64(2) + np.uint64(1))
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    odd = (pos & np.uint64(1)).astype(bool)
    return np.where(odd, radius * np.sin(angle), radius * np.cos(angle))


@dataclass
class RngState:
    seed: int
    position: int = 0

    def __post_init__(self):
        self.seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF


def normal_block(seed: int, base: int, ld: int, row0: int, rows: int, cols: int) -> np.ndarray:
    """Rows ``row0:row0+rows`` of a column-major draw with leading dimension `ld`
    that starts at stream position `base`."""
    r = np.arange(rows, dtype=np.uint64) + np.uint64(row0)
    c = np.arange(cols, dtype=np.uint64) * np.uint64(ld)
    pos = np.uint64(base) + r[:, None] + c[None, :]
    return np.asfortranarray(normal_at(seed, pos))


def generate_normal_random(rng: RngState, m: int, n: int) -> np.ndarray:
    if m < 1 or n < 1:
        raise ShapeError("generate_normal_random needs m, n >= 1")
    out = normal_block(rng.seed, rng.position, m, 0, m, n)
    rng.position += m * n
    return out


# ---------------------------------------------------------------------------

def frobenius_norm(A) -> float:
    a = np.asarray(A, dtype=np.float64)
    if a.size == 0:
        return 0.0
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        return 0.0
    # np.sum on a contiguous 1-D array is pairwise
    s = np.ascontiguousarray(a / scale).ravel()
    return scale * float(np.sqrt(np.sum(s * s)))


def spectral_norm_estimate(A, tol: float = 1e-10, max_iter: int = 10000, seed: int = 0x5EED) -> float:
    """Largest singular value by power iteration on A^T A.

    Starts from a fixed seeded Gaussian vector and stops once the relative
    change drops below `tol`. Power iteration approaches sigma_1 from below,
    so the result is biased low when stopped early.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = np.asarray(A, dtype=np.float64)
    if a.size == 0 or not np.any(a):
        return 0.0
    x = normal_at(seed, np.arange(a.shape[1]))
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(max_iter):
        y = a @ x
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return sigma
        x = a.T @ y
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return new
        x /= nx
        if abs(new - sigma) <= tol * new:
            return new
        sigma = new
    return sigma


# ---------------------------------------------------------------------------

class BlockGrid:
    """b-by-b tiling of a parent matrix; blocks are aliasing views.

    Edge blocks are smaller when b does not divide the dimensions.
    """

    def __init__(self, parent: np.ndarray, b: int):
        if b < 1:
            raise ValueError("block size must be >= 1")
        self.parent = parent
        self.b = int(b)

    @property
    def M(self) -> int:
        return -(-self.parent.shape[0] // self.b)

    @property
    def N(self) -> int:
        return -(-self.parent.shape[1] // self.b)

    def bounds(self, i: int, j: int) -> tuple[slice, slice]:
        if not (0 <= i < self.M and 0 <= j < self.N):
            raise IndexError(f"block ({i},{j}) outside {self.M}x{self.N} grid")
        m, n = self.parent.shape
        b = self.b
        return slice(i * b, min((i + 1) * b, m)), slice(j * b, min((j + 1) * b, n))

    def block(self, i: int, j: int) -> np.ndarray:
        rows, cols = self.bounds(i, j)
        return self.parent[rows, cols]

    def __iter__(self):
        for j in range(self.N):
            for i in range(self.M):
                yield (i, j), self.block(i, j)


def block(grid: BlockGrid, i: int, j: int) -> np.ndarray:
    return grid.block(i, j)
