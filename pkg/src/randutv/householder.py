"""Unpivoted Householder QR, compact WY, and triangular-dense updating QR.

Conventions
-----------
* Reflectors are H_j = I - tau_j v_j v_j^T with v_j[j] = 1 (implicit).
* R always has a non-negative diagonal. tau = 0 encodes H_j = I.
* A compact WY pair (W, Twy) represents Q = H_1 H_2 ... H_k = I - W Twy W^T,
  so Q^T = H_k ... H_1 = I - W Twy^T W^T.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import kernel
from .errors import ShapeError
from .matrix import gemm, zeros


def _reflector(alpha, sigma):
    """(beta, v1, tau) mapping [alpha; x] to [beta; 0] with beta >= 0.

    `sigma` is ||x||^2. Uses the cancellation-free form of alpha - beta.
    """
    if sigma == 0.0:
        if alpha >= 0.0:
            return alpha, 1.0, 0.0
        return -alpha, 1.0, 2.0
    mu = np.sqrt(alpha * alpha + sigma)
    if alpha <= 0.0:
        v1 = alpha - mu
    else:
        v1 = -sigma / (alpha + mu)
    tau = 2.0 * v1 * v1 / (sigma + v1 * v1)
    return mu, v1, tau


# ---------------------------------------------------------------------------
# hqr

def _hqr_numpy(A, tau):
    m, n = A.shape
    for j in range(tau.shape[0]):
        x = A[j + 1:, j]
        beta, v1, t = _reflector(A[j, j], float(x @ x))
        tau[j] = t
        A[j, j] = beta
        if t == 0.0:
            continue
        x /= v1
        if j + 1 < n:
            w = A[j, j + 1:] + x @ A[j + 1:, j + 1:]
            A[j, j + 1:] -= t * w
            A[j + 1:, j + 1:] -= t * np.outer(x, w)


@kernel(_hqr_numpy)
def _hqr(A, tau):
    m, n = A.shape
    for j in range(tau.shape[0]):
        alpha = A[j, j]
        sigma = 0.0
        for i in range(j + 1, m):
            sigma += A[i, j] * A[i, j]
        if sigma == 0.0:
            if alpha >= 0.0:
                tau[j] = 0.0
                continue
            beta = -alpha
            v1 = 1.0
            t = 2.0
        else:
            beta = np.sqrt(alpha * alpha + sigma)
            if alpha <= 0.0:
                v1 = alpha - beta
            else:
                v1 = -sigma / (alpha + beta)
            t = 2.0 * v1 * v1 / (sigma + v1 * v1)
        tau[j] = t
        A[j, j] = beta
        for i in range(j + 1, m):
            A[i, j] /= v1
        for k in range(j + 1, n):
            w = A[j, k]
            for i in range(j + 1, m):
                w += A[i, j] * A[i, k]
            w *= t
            A[j, k] -= w
            for i in range(j + 1, m):
                A[i, k] -= w * A[i, j]


def _hqrp_numpy(A, tau, perm):
    m, n = A.shape
    for j in range(tau.shape[0]):
        norms = np.einsum("ij,ij->j", A[j:, j:], A[j:, j:])
        p = j + int(np.argmax(norms))
        if p != j:
            A[:, [j, p]] = A[:, [p, j]]
            perm[j], perm[p] = perm[p], perm[j]
        _hqr_numpy(A[j:, j:j + 1], tau[j:j + 1])
        t = tau[j]
        if t == 0.0 or j + 1 >= n:
            continue
        x = A[j + 1:, j]
        w = A[j, j + 1:] + x @ A[j + 1:, j + 1:]
        A[j, j + 1:] -= t * w
        A[j + 1:, j + 1:] -= t * np.outer(x, w)


@kernel(_hqrp_numpy)
def _hqrp(A, tau, perm):
    m, n = A.shape
    for j in range(tau.shape[0]):
        best = -1.0
        p = j
        for k in range(j, n):
            s = 0.0
            for i in range(j, m):
                s += A[i, k] * A[i, k]
            if s > best:
                best = s
                p = k
        if p != j:
            for i in range(m):
                tmp = A[i, j]
                A[i, j] = A[i, p]
                A[i, p] = tmp
            itmp = perm[j]
            perm[j] = perm[p]
            perm[p] = itmp
        alpha = A[j, j]
        sigma = 0.0
        for i in range(j + 1, m):
            sigma += A[i, j] * A[i, j]
        if sigma == 0.0:
            if alpha >= 0.0:
                tau[j] = 0.0
                continue
            beta = -alpha
            v1 = 1.0
            t = 2.0
        else:
            beta = np.sqrt(alpha * alpha + sigma)
            if alpha <= 0.0:
                v1 = alpha - beta
            else:
                v1 = -sigma / (alpha + beta)
            t = 2.0 * v1 * v1 / (sigma + v1 * v1)
        tau[j] = t
        A[j, j] = beta
        for i in range(j + 1, m):
            A[i, j] /= v1
        for k in range(j + 1, n):
            w = A[j, k]
            for i in range(j + 1, m):
                w += A[i, j] * A[i, k]
            w *= t
            A[j, k] -= w
            for i in range(j + 1, m):
                A[i, k] -= w * A[i, j]


# ---------------------------------------------------------------------------
# triangular-dense QR: annihilate D under the upper-triangular R. Reflector j
# is [e_j; d_j], so it touches row j of R and all rows of D only.

def _td_qr_numpy(R, D, tau):
    b = R.shape[1]
    for j in range(b):
        d = D[:, j]
        beta, v1, t = _reflector(R[j, j], float(d @ d))
        tau[j] = t
        R[j, j] = beta
        if t == 0.0:
            continue
        d /= v1
        if j + 1 < b:
            w = R[j, j + 1:] + d @ D[:, j + 1:]
            R[j, j + 1:] -= t * w
            D[:, j + 1:] -= t * np.outer(d, w)


@kernel(_td_qr_numpy)
def _td_qr(R, D, tau):
    mb = D.shape[0]
    b = R.shape[1]
    for j in range(b):
        alpha = R[j, j]
        sigma = 0.0
        for i in range(mb):
            sigma += D[i, j] * D[i, j]
        if sigma == 0.0:
            if alpha >= 0.0:
                tau[j] = 0.0
                continue
            beta = -alpha
            v1 = 1.0
            t = 2.0
        else:
            beta = np.sqrt(alpha * alpha + sigma)
            if alpha <= 0.0:
                v1 = alpha - beta
            else:
                v1 = -sigma / (alpha + beta)
            t = 2.0 * v1 * v1 / (sigma + v1 * v1)
        tau[j] = t
        R[j, j] = beta
        for i in range(mb):
            D[i, j] /= v1
        for k in range(j + 1, b):
            w = R[j, k]
            for i in range(mb):
                w += D[i, j] * D[i, k]
            w *= t
            R[j, k] -= w
            for i in range(mb):
                D[i, k] -= w * D[i, j]


# ---------------------------------------------------------------------------
# Twy from the Householder vectors: Twy[:j, j] = -tau_j Twy[:j, :j] (W[:, :j]^T w_j)

def _larft_numpy(W, tau, T):
    for j in range(tau.shape[0]):
        T[j, j] = tau[j]
        if j == 0 or tau[j] == 0.0:
            continue
        z = W[:, :j].T @ W[:, j]
        T[:j, j] = -tau[j] * (T[:j, :j] @ z)


@kernel(_larft_numpy)
def _larft(W, tau, T):
    m = W.shape[0]
    k = tau.shape[0]
    z = np.empty(k)
    for j in range(k):
        T[j, j] = tau[j]
        if tau[j] == 0.0:
            continue
        for l in range(j):
            s = 0.0
            for i in range(m):
                s += W[i, l] * W[i, j]
            z[l] = s
        for r in range(j):
            s = 0.0
            for l in range(r, j):
                s += T[r, l] * z[l]
            T[r, j] = -tau[j] * s


# ---------------------------------------------------------------------------

@dataclass
class HouseholderFactor:
    """Packed QR output: R on and above the diagonal of `packed`, Householder
    vectors strictly below it (unit diagonal implicit)."""
    packed: np.ndarray
    tau: np.ndarray

    @property
    def V(self) -> np.ndarray:
        return unit_lower(self.packed, self.tau.shape[0])

    @property
    def R(self) -> np.ndarray:
        return np.triu(self.packed)


@dataclass
class CompactWY:
    W: np.ndarray
    Twy: np.ndarray

    @property
    def k(self) -> int:
        return self.Twy.shape[0]


@dataclass
class TdQRFactor:
    R_top: np.ndarray
    D_house: np.ndarray
    tau: np.ndarray
    Twy: np.ndarray

    @property
    def W(self) -> np.ndarray:
        b = self.R_top.shape[1]
        return np.asfortranarray(np.vstack([np.eye(b), self.D_house]))


def unit_lower(packed: np.ndarray, k: int) -> np.ndarray:
    """Explicit unit-lower-trapezoidal W (m x k) from packed storage."""
    m = packed.shape[0]
    W = np.asfortranarray(np.tril(packed[:, :k], -1))
    W[np.arange(min(m, k)), np.arange(min(m, k))] = 1.0
    return W


def hqr(A: np.ndarray) -> HouseholderFactor:
    """Householder QR of A in place (A must be a writable float64 array)."""
    tau = np.zeros(min(A.shape))
    if tau.size:
        _hqr(A, tau)
    return HouseholderFactor(A, tau)


def hqr_pivoted(A: np.ndarray) -> tuple[HouseholderFactor, np.ndarray]:
    """Householder QR with column pivoting, A[:, perm] = Q R, in place.

    Each step brings forward the trailing column of largest remaining norm,
    so |R| has a non-increasing diagonal.
    """
    tau = np.zeros(min(A.shape))
    perm = np.arange(A.shape[1])
    if tau.size:
        _hqrp(A, tau, perm)
    return HouseholderFactor(A, tau), perm


def wy_factor(W: np.ndarray, tau: np.ndarray) -> np.ndarray:
    k = tau.shape[0]
    T = zeros(k, k)
    if k:
        _larft(np.asfortranarray(W), tau, T)
    return T


def form_compact_wy(h: HouseholderFactor) -> CompactWY:
    W = h.V
    return CompactWY(W, wy_factor(W, h.tau))


def apply_qt_left(wy: CompactWY, B: np.ndarray) -> np.ndarray:
    """B <- Q^T B = B - W Twy^T (W^T B)."""
    if B.shape[0] != wy.W.shape[0]:
        raise ShapeError(f"apply_qt_left: W has {wy.W.shape[0]} rows, B has {B.shape[0]}")
    if B.shape[1] == 0 or wy.k == 0:
        return B
    Z = gemm(1.0, True, wy.W, False, B, 0.0, zeros(wy.k, B.shape[1]))
    Z2 = gemm(1.0, True, wy.Twy, False, Z, 0.0, zeros(wy.k, B.shape[1]))
    return gemm(-1.0, False, wy.W, False, Z2, 1.0, B)


def apply_q_left(wy: CompactWY, B: np.ndarray) -> np.ndarray:
    """B <- Q B = B - W Twy (W^T B)."""
    if B.shape[0] != wy.W.shape[0]:
        raise ShapeError(f"apply_q_left: W has {wy.W.shape[0]} rows, B has {B.shape[0]}")
    if B.shape[1] == 0 or wy.k == 0:
        return B
    Z = gemm(1.0, True, wy.W, False, B, 0.0, zeros(wy.k, B.shape[1]))
    Z2 = gemm(1.0, False, wy.Twy, False, Z, 0.0, zeros(wy.k, B.shape[1]))
    return gemm(-1.0, False, wy.W, False, Z2, 1.0, B)


def apply_q_right(wy: CompactWY, B: np.ndarray) -> np.ndarray:
    """B <- B Q = B - (B W) Twy W^T."""
    if B.shape[1] != wy.W.shape[0]:
        raise ShapeError(f"apply_q_right: W has {wy.W.shape[0]} rows, B has {B.shape[1]} columns")
    if B.shape[0] == 0 or wy.k == 0:
        return B
    Z = gemm(1.0, False, B, False, wy.W, 0.0, zeros(B.shape[0], wy.k))
    Z2 = gemm(1.0, False, Z, False, wy.Twy, 0.0, zeros(B.shape[0], wy.k))
    return gemm(-1.0, False, Z2, True, wy.W, 1.0, B)


def comp_td_qr(R_top: np.ndarray, D: np.ndarray) -> TdQRFactor:
    """QR of the stacked [R_top; D]; R_top gets the new R, D the reflector tails.

    Only the upper triangle of R_top is read or written.
    """
    b = R_top.shape[1]
    if R_top.shape[0] != b or D.shape[1] != b:
        raise ShapeError(f"comp_td_qr: R_top {R_top.shape}, D {D.shape}")
    tau = np.zeros(b)
    if b:
        _td_qr(R_top, D, tau)
    Twy = zeros(b, b)
    if b:
        _larft(np.asfortranarray(D), tau, Twy)
    return TdQRFactor(R_top, D, tau, Twy)


def td_twy(D_house: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Twy of a td factor from its reflector tails (the identity top adds nothing
    to the off-diagonal inner products)."""
    k = tau.shape[0]
    T = zeros(k, k)
    if k:
        _larft(np.asfortranarray(D_house), tau, T)
    return T


def apply_qt_left_td_raw(D_house, Twy, B_top, B_bot):
    b = Twy.shape[0]
    if B_top.shape[0] != b or B_bot.shape[0] != D_house.shape[0] or B_top.shape[1] != B_bot.shape[1]:
        raise ShapeError(f"apply_qt_left_td: top {B_top.shape}, bottom {B_bot.shape}, b={b}")
    w = B_top.shape[1]
    if w == 0:
        return
    Z = np.array(B_top, order="F")
    gemm(1.0, True, D_house, False, B_bot, 1.0, Z)
    Z2 = gemm(1.0, True, Twy, False, Z, 0.0, zeros(b, w))
    B_top -= Z2
    gemm(-1.0, False, D_house, False, Z2, 1.0, B_bot)


def apply_q_right_td_raw(D_house, Twy, B_left, B_right):
    b = Twy.shape[0]
    if B_left.shape[1] != b or B_right.shape[1] != D_house.shape[0] or B_left.shape[0] != B_right.shape[0]:
        raise ShapeError(f"apply_q_right_td: left {B_left.shape}, right {B_right.shape}, b={b}")
    rows = B_left.shape[0]
    if rows == 0:
        return
    Z = np.array(B_left, order="F")
    gemm(1.0, False, B_right, False, D_house, 1.0, Z)
    Z2 = gemm(1.0, False, Z, False, Twy, 0.0, zeros(rows, b))
    B_left -= Z2
    gemm(-1.0, False, Z2, True, D_house, 1.0, B_right)


def apply_qt_left_td(f: TdQRFactor, B_top: np.ndarray, B_bot: np.ndarray) -> None:
    """(B_top; B_bot) <- Q_td^T (B_top; B_bot) at O(b^2 * width) cost."""
    apply_qt_left_td_raw(f.D_house, f.Twy, B_top, B_bot)


def apply_q_right_td(f: TdQRFactor, B_left: np.ndarray, B_right: np.ndarray) -> None:
    """(B_left B_right) <- (B_left B_right) Q_td."""
    apply_q_right_td_raw(f.D_house, f.Twy, B_left, B_right)


def explicit_q(wy: CompactWY, m: int | None = None) -> np.ndarray:
    """Dense Q = I - W Twy W^T (for tests and small reconstructions)."""
    m = wy.W.shape[0] if m is None else m
    Q = np.asfortranarray(np.eye(m))
    return apply_q_right(wy, Q)
