"""Reference blocked randUTV: A = U T V^T with T upper triangular/trapezoidal.

Each step works on the trailing submatrix T22 = T[k:, k:], k = step*b:

1. sample Y = (T22^T T22)^q T22^T G with a Gaussian G of b columns, take its
   Householder QR and apply that Q from the right (T and V);
2. Householder QR of the panel T22[:, :b], applied from the left to T and
   from the right to U;
3. SVD of the b x b diagonal block, pushed into the row block to its right,
   the column block above it, and U, V.

When no more than b rows or columns remain, the trailing block is finished
with a dense SVD.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .householder import (CompactWY, apply_q_left, apply_q_right, apply_qt_left,
                          form_compact_wy, hqr)
from .matrix import RngState, as_matrix, eye, gemm, generate_normal_random, matmul, zeros
from .svd import DEFAULT_TOL, svd_block


@dataclass(frozen=True)
class UTVConfig:
    b: int = 128
    q: int = 1
    build_u: bool = True
    build_v: bool = True
    seed: int = 0
    qr_first: bool = False
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 1:
            raise ConfigError(f"block size b must be a positive integer, got {self.b}")
        if int(self.q) != self.q or self.q < 0:
            raise ConfigError(f"power iteration count q must be >= 0, got {self.q}")


@dataclass
class UTVResult:
    T: np.ndarray
    U: Optional[np.ndarray]
    V: Optional[np.ndarray]
    config: UTVConfig


def sketch_offset(m: int, b: int, step: int) -> int:
    """Stream position of the Gaussian sketch drawn at `step`.

    Step s draws an (m - s*b) x b matrix, so the offsets are cumulative sums.
    """
    return b * (step * m - b * step * (step - 1) // 2)


def _right_mult(X: np.ndarray, M: np.ndarray) -> None:
    if X.size:
        X[...] = matmul(X, M)


def build_v_alpha(T22: np.ndarray, b: int, q: int, rng: RngState) -> CompactWY:
    """WY form of the Q factor of Y = (T22^T T22)^q T22^T G.

    Power iterations are plain alternating products without
    re-orthonormalization.
    """
    r, c = T22.shape
    G = generate_normal_random(rng, r, b)
    Y = matmul(T22, G, transa=True)
    for _ in range(q):
        Z = matmul(T22, Y)
        Y = matmul(T22, Z, transa=True)
    return form_compact_wy(hqr(Y))


def build_u_alpha(panel: np.ndarray) -> CompactWY:
    """Householder QR of the b-column panel, in place; returns its WY form.

    The panel keeps R on/above the diagonal and the reflectors below until the
    caller clears them.
    """
    return form_compact_wy(hqr(panel))


def beta_stage(T11, T_right, T_above=None, U_cols=None, V_cols=None, tol=DEFAULT_TOL):
    """Diagonalize the b x b block T11 = Us D Vs^T and propagate the rotations.

    T11 <- diag(D), T_right <- Us^T T_right, T_above <- T_above Vs,
    U_cols <- U_cols Us, V_cols <- V_cols Vs.
    """
    s = svd_block(T11, tol)
    T11[...] = 0.0
    T11[np.diag_indices(T11.shape[0])] = s.D
    if T_right is not None and T_right.size:
        T_right[...] = matmul(s.U, T_right, transa=True)
    if T_above is not None:
        _right_mult(T_above, s.V)
    if U_cols is not None:
        _right_mult(U_cols, s.U)
    if V_cols is not None:
        _right_mult(V_cols, s.V)
    return s


def _final_block(T, U, V, k, tol):
    """Dense SVD of the trailing T[k:, k:], reduced by QR first when rectangular."""
    m, n = T.shape
    r, c = m - k, n - k
    T22 = T[k:, k:]
    if r == c:
        beta_stage(T22, None, T[:k, k:], None if U is None else U[:, k:],
                   None if V is None else V[:, k:], tol)
        return
    if r > c:
        f = hqr(np.array(T22, order="F"))
        wy = form_compact_wy(f)
        s = svd_block(np.triu(f.packed[:c, :c]), tol)
        T22[...] = 0.0
        T22[np.arange(c), np.arange(c)] = s.D
        _right_mult(T[:k, k:], s.V)
        if V is not None:
            _right_mult(V[:, k:], s.V)
        if U is not None:
            apply_q_right(wy, U[:, k:])
            _right_mult(U[:, k:k + c], s.U)
        return
    # wide: T22^T = Q [R; 0] so T22 = [R^T 0] Q^T, and R^T = Us D Vs^T
    f = hqr(np.array(T22.T, order="F"))
    wy = form_compact_wy(f)
    s = svd_block(np.triu(f.packed[:r, :r]).T, tol)
    T22[...] = 0.0
    T22[np.arange(r), np.arange(r)] = s.D
    for X in (T[:k, k:], None if V is None else V[:, k:]):
        if X is None:
            continue
        apply_q_right(wy, X)
        _right_mult(X[:, :r], s.V)
    if U is not None:
        _right_mult(U[:, k:], s.U)


def randutv(A, cfg: UTVConfig, on_step: Callable[[int, np.ndarray], None] | None = None) -> UTVResult:
    """Blocked randUTV of A.

    `on_step(step, T)` is called after every completed step (tests use it to
    check the intermediate structure).
    """
    T = as_matrix(A)
    m, n = T.shape
    if cfg.qr_first and m > n:
        return _randutv_qr_first(T, cfg, on_step)
    b = cfg.b
    U = eye(m) if cfg.build_u else None
    V = eye(n) if cfg.build_v else None
    rng = RngState(cfg.seed)
    step = 0
    while True:
        k = step * b
        r, c = m - k, n - k
        if r <= 0 or c <= 0:
            break
        if r <= b or c <= b:
            _final_block(T, U, V, k, cfg.tol)
            if on_step:
                on_step(step, T)
            break
        wy_v = build_v_alpha(T[k:, k:], b, cfg.q, rng)
        apply_q_right(wy_v, T[:, k:])
        if V is not None:
            apply_q_right(wy_v, V[:, k:])

        panel = T[k:, k:k + b]
        wy_u = build_u_alpha(panel)
        apply_qt_left(wy_u, T[k:, k + b:])
        if U is not None:
            apply_q_right(wy_u, U[:, k:])
        panel[...] = np.triu(panel)

        beta_stage(T[k:k + b, k:k + b], T[k:k + b, k + b:], T[:k, k:k + b],
                   None if U is None else U[:, k:k + b],
                   None if V is None else V[:, k:k + b], cfg.tol)
        if on_step:
            on_step(step, T)
        step += 1
    return UTVResult(T, U, V, cfg)


def _randutv_qr_first(A, cfg, on_step):
    # A = Q [R; 0] and R = U' T' V^T give A = (Q diag(U', I)) [T'; 0] V^T
    m, n = A.shape
    f = hqr(A)
    inner = randutv(np.triu(A[:n, :n]), replace(cfg, qr_first=False), on_step)
    T = zeros(m, n)
    T[:n] = inner.T
    U = None
    if cfg.build_u:
        U = eye(m)
        U[:n, :n] = inner.U
        apply_q_left(form_compact_wy(f), U)
    return UTVResult(T, U, inner.V, cfg)


def reconstruct(res: UTVResult) -> np.ndarray:
    """U T V^T through the deterministic gemm (both factors required)."""
    if res.U is None or res.V is None:
        raise ValueError("reconstruction needs both U and V")
    UT = matmul(res.U, res.T)
    return gemm(1.0, False, UT, True, res.V, 0.0, zeros(res.T.shape[0], res.V.shape[0]))
