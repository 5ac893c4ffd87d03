"""One-sided Jacobi SVD for small square blocks, plus a QR-preconditioned dense SVD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import kernel
from .errors import ConvergenceError, ShapeError
from .householder import apply_q_left, apply_q_right, form_compact_wy, hqr, hqr_pivoted
from .matrix import EPS, frobenius_norm

MAX_SWEEPS = 30
DEFAULT_TOL = 1e-15


@dataclass
class SvdTriple:
    U: np.ndarray
    D: np.ndarray
    V: np.ndarray


def _rotation(alpha, beta, gamma):
    zeta = (beta - alpha) / (2.0 * gamma)
    t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
    c = 1.0 / np.sqrt(1.0 + t * t)
    return c, c * t


def _jacobi_numpy(U, V, tol, small, max_sweeps):
    k = U.shape[1]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(k - 1):
            for q in range(p + 1, k):
                up, uq = U[:, p], U[:, q]
                alpha = float(up @ up)
                beta = float(uq @ uq)
                gamma = float(up @ uq)
                scale = np.sqrt(alpha * beta)
                if alpha <= small or beta <= small:
                    continue
                off = max(off, abs(gamma) / scale)
                if abs(gamma) <= tol * scale:
                    continue
                c, s = _rotation(alpha, beta, gamma)
                U[:, p], U[:, q] = c * up - s * uq, s * up + c * uq
                vp, vq = V[:, p], V[:, q]
                V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
        if off <= tol:
            return sweep + 1, off
    return -1, off


@kernel(_jacobi_numpy)
def _jacobi(U, V, tol, small, max_sweeps):
    n = U.shape[0]
    k = U.shape[1]
    off = 0.0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(k - 1):
            for q in range(p + 1, k):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(n):
                    a = U[i, p]
                    b = U[i, q]
                    alpha += a * a
                    beta += b * b
                    gamma += a * b
                scale = np.sqrt(alpha * beta)
                if alpha <= small or beta <= small:
                    continue
                rel = abs(gamma) / scale
                if rel > off:
                    off = rel
                if abs(gamma) <= tol * scale:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for i in range(n):
                    a = U[i, p]
                    b = U[i, q]
                    U[i, p] = c * a - s * b
                    U[i, q] = s * a + c * b
                for i in range(V.shape[0]):
                    a = V[i, p]
                    b = V[i, q]
                    V[i, p] = c * a - s * b
                    V[i, q] = s * a + c * b
        if off <= tol:
            return sweep + 1, off
    return -1, off


def _complete_columns(U, keep):
    """Replace the columns of U not flagged in `keep` by an orthonormal
    completion of the kept ones."""
    k = U.shape[0]
    r = int(np.count_nonzero(keep))
    if r == U.shape[1] and r == k:
        return U
    basis = np.array(U[:, keep], order="F")
    f = hqr(basis)
    Q = apply_q_right(form_compact_wy(f), np.asfortranarray(np.eye(k)))
    out = np.array(U, order="F")
    out[:, ~keep] = Q[:, r:r + int(np.count_nonzero(~keep))]
    return out


def svd_block(A, tol: float = DEFAULT_TOL, noise_floor: bool = True) -> SvdTriple:
    """SVD of a square block by one-sided (Hestenes) Jacobi on its columns.

    Column pairs are rotated until every normalized Gram entry
    |u_p.u_q| / (|u_p| |u_q|) is at most max(tol, k*eps); the floor is the
    rounding level of a length-k dot product, below which Jacobi cannot push.
    Columns whose norm is under eps*||A||_F are rounding noise: they are
    not rotated, count as zero singular values and get an orthonormal
    completion in U. Singular values come back descending and non-negative,
    with column signs carried by U. `noise_floor=False` only skips exactly
    zero columns; use it when the input is already graded.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"svd_block needs a square matrix, got {A.shape}")
    k = A.shape[0]
    if k == 0:
        return SvdTriple(np.zeros((0, 0)), np.zeros(0), np.zeros((0, 0)))
    U = np.array(A, order="F")
    V = np.asfortranarray(np.eye(k))
    thresh = max(tol, k * EPS)
    small = (EPS * frobenius_norm(A)) ** 2 if noise_floor else 0.0
    sweeps, off = _jacobi(U, V, thresh, small, MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError(f"Jacobi SVD did not converge in {MAX_SWEEPS} sweeps", off)
    D = np.sqrt(np.einsum("ij,ij->j", U, U))
    D[D * D <= small] = 0.0
    order = np.argsort(-D, kind="stable")
    D = D[order]
    U = np.asfortranarray(U[:, order])
    V = np.asfortranarray(V[:, order])
    keep = D > 0.0
    U[:, keep] /= D[keep]
    if not np.all(keep):
        U = _complete_columns(U, keep)
    return SvdTriple(U, D, V)


def _preconditioned(A, tol, full):
    """SVD of a tall or square A via A[:, perm] = Q R and Jacobi on R^T.

    Pivoting grades the rows of R, which makes one-sided Jacobi on R^T converge
    in a few sweeps even when the spectrum spans many orders of magnitude.
    With R^T = Ur D Vr^T: A = (Q [Vr; 0]) D (P Ur)^T.
    """
    m, n = A.shape
    work = np.array(A, order="F")
    f, perm = hqr_pivoted(work)
    inner = svd_block(np.triu(work[:n, :n]).T, tol, noise_floor=False)
    U = np.asfortranarray(np.eye(m) if full else np.zeros((m, n)))
    U[:n, :n] = inner.V
    apply_q_left(form_compact_wy(f), U)
    V = np.empty_like(inner.U)
    V[perm, :] = inner.U
    return SvdTriple(U, inner.D, np.asfortranarray(V))


def svd_dense(A, tol: float = DEFAULT_TOL) -> SvdTriple:
    """Economic SVD: U is m x p, D has p entries, V is n x p, p = min(m, n).

    The input is first reduced by column-pivoted Householder QR, then the
    square triangular factor goes through `svd_block`.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ShapeError("svd_dense needs a 2-D matrix")
    m, n = A.shape
    if min(m, n) > 2048:
        raise ShapeError(f"svd_dense is limited to min(m, n) <= 2048, got {min(m, n)}")
    if m < n:
        t = svd_dense(A.T, tol)
        return SvdTriple(t.V, t.D, t.U)
    if n == 0:
        return SvdTriple(np.zeros((m, 0)), np.zeros(0), np.zeros((0, 0)))
    return _preconditioned(A, tol, full=False)


def svd_full(A, tol: float = DEFAULT_TOL) -> SvdTriple:
    """Full SVD of a possibly rectangular block: U is m x m and V is n x n.

    D has min(m, n) entries; the extra columns of the larger factor complete
    it to an orthogonal matrix. Square input goes straight to `svd_block`.
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    if m == n:
        return svd_block(A, tol)
    if m < n:
        t = svd_full(A.T, tol)
        return SvdTriple(t.V, t.D, t.U)
    return _preconditioned(A, tol, full=True)


def singular_values(A, tol: float = DEFAULT_TOL) -> np.ndarray:
    return svd_dense(A, tol).D


def reconstruction_error(A, t: SvdTriple) -> float:
    return frobenius_norm(np.asarray(A) - (t.U * t.D) @ t.V.T)
