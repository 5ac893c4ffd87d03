import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from conftest import EPS, fro, orth_err
from randutv.errors import ShapeError
from randutv.householder import (CompactWY, apply_q_left, apply_q_right, apply_q_right_td,
                                 apply_qt_left, apply_qt_left_td, comp_td_qr, explicit_q,
                                 form_compact_wy, hqr, hqr_pivoted)


def reflectors(h):
    V = h.V
    return [(V[:, j].copy(), h.tau[j]) for j in range(h.tau.shape[0])]


def seq_qt_left(refl, B):
    """H_k ... H_1 B, applying H_1 first."""
    B = B.copy()
    for v, t in refl:
        B -= t * np.outer(v, v @ B)
    return B


def seq_q_right(refl, B):
    """B H_1 ... H_k."""
    B = B.copy()
    for v, t in refl:
        B -= t * np.outer(B @ v, v)
    return B


def factor(A):
    W = np.array(A, order="F")
    return hqr(W)


# -- hqr ----------------------------------------------------------------------

def test_hqr_identity():
    h = factor(np.eye(4))
    assert np.array_equal(h.R, np.eye(4))
    assert np.all(h.tau == 0)


def test_hqr_column_norm():
    h = factor([[3.0], [4.0]])
    assert h.R[0, 0] == pytest.approx(5.0, rel=1e-15)


def test_hqr_random_reconstruction(rng):
    A = rng.standard_normal((8, 5))
    h = factor(A)
    Q = explicit_q(form_compact_wy(h))
    assert orth_err(Q) <= 1e-13
    assert np.max(np.abs(Q[:, :5] @ h.R[:5] - A)) <= 1e-13


def test_hqr_nonnegative_diagonal_and_vs_lapack(rng):
    A = rng.standard_normal((12, 9))
    h = factor(A)
    R_ref = sla.qr(A, mode="r")[0][:9]
    assert np.all(np.diag(h.R) >= 0)
    assert np.allclose(np.abs(h.R[:9]), np.abs(R_ref), atol=1e-12)


def test_hqr_tau_scaling(rng):
    h = factor(rng.standard_normal((10, 6)))
    for v, t in reflectors(h):
        assert abs(t * (v @ v) - 2.0) <= 8 * EPS


def test_hqr_zero_and_negative_columns():
    A = np.zeros((4, 3))
    A[0, 1] = -2.0
    h = factor(A)
    assert h.tau[0] == 0.0
    assert np.all(np.diag(h.R) >= 0)
    Q = explicit_q(form_compact_wy(h))
    assert np.allclose(Q[:, :3] @ h.R[:3], A, atol=1e-15)


@pytest.mark.parametrize("shape", [(1, 1), (5, 1), (1, 5), (3, 7), (64, 64), (200, 120)])
def test_hqr_shapes(rng, shape):
    A = rng.standard_normal(shape)
    h = factor(A)
    Q = explicit_q(form_compact_wy(h))
    k = min(shape)
    m, n = shape
    assert orth_err(Q) <= 100 * m * EPS
    assert fro(Q[:, :k] @ h.R[:k] - A) <= 100 * max(m, n) * EPS * fro(A)


@pytest.mark.slow
def test_hqr_512(rng):
    A = rng.standard_normal((512, 512))
    h = factor(A)
    Q = explicit_q(form_compact_wy(h))
    assert fro(Q @ h.R - A) <= 100 * 512 * EPS * fro(A)
    assert orth_err(Q) <= 100 * 512 * EPS


def test_hqr_pivoted(rng):
    A = rng.standard_normal((9, 6)) @ np.diag(10.0 ** -np.arange(6))[:, ::-1]
    f, perm = hqr_pivoted(np.array(A, order="F"))
    d = np.abs(np.diag(f.R))
    assert np.all(np.diff(d) <= 0)
    Q = explicit_q(form_compact_wy(f))
    assert np.allclose(Q[:, :6] @ f.R[:6], A[:, perm], atol=1e-14)
    assert sorted(perm) == list(range(6))


# -- compact WY -----------------------------------------------------------------

def test_wy_single_reflector(rng):
    h = factor(rng.standard_normal((5, 1)))
    wy = form_compact_wy(h)
    assert np.array_equal(wy.W[:, 0], h.V[:, 0])
    assert wy.Twy[0, 0] == h.tau[0]


def test_wy_identity_acts_as_identity(rng):
    wy = form_compact_wy(factor(np.eye(4)))
    B = rng.standard_normal((4, 3))
    assert np.array_equal(apply_qt_left(wy, np.asfortranarray(B.copy())), B)
    assert np.array_equal(apply_q_right(wy, np.asfortranarray(B.T.copy())), B.T)


def test_wy_vs_sequential(rng):
    h = factor(rng.standard_normal((8, 3)))
    wy = form_compact_wy(h)
    refl = reflectors(h)
    B = rng.standard_normal((8, 6))
    assert np.max(np.abs(apply_qt_left(wy, np.asfortranarray(B.copy())) - seq_qt_left(refl, B))) <= 1e-13
    C = rng.standard_normal((6, 8))
    assert np.max(np.abs(apply_q_right(wy, np.asfortranarray(C.copy())) - seq_q_right(refl, C))) <= 1e-13


def test_apply_single_reflector_formula(rng):
    h = factor(rng.standard_normal((5, 1)))
    v, t = reflectors(h)[0]
    B = rng.standard_normal((5, 2))
    out = apply_qt_left(form_compact_wy(h), np.asfortranarray(B.copy()))
    assert np.allclose(out, B - t * np.outer(v, v @ B), atol=1e-15)


def test_q_left_inverts_qt_left(rng):
    wy = form_compact_wy(factor(rng.standard_normal((7, 4))))
    B = rng.standard_normal((7, 3))
    X = apply_qt_left(wy, np.asfortranarray(B.copy()))
    assert np.allclose(apply_q_left(wy, X), B, atol=1e-14)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31))
def test_wy_orthogonal_and_sequential(m, k, seed):
    k = min(m, k)
    r = np.random.default_rng(seed)
    h = factor(r.standard_normal((m, k)))
    wy = form_compact_wy(h)
    Q = explicit_q(wy)
    assert orth_err(Q) <= 100 * max(k, 1) * EPS
    B = r.standard_normal((m, 3))
    assert np.max(np.abs(apply_qt_left(wy, np.asfortranarray(B.copy())) - seq_qt_left(reflectors(h), B))) <= 1e-12


def test_apply_shape_errors(rng):
    wy = form_compact_wy(factor(rng.standard_normal((5, 2))))
    with pytest.raises(ShapeError):
        apply_qt_left(wy, np.zeros((4, 2)))
    with pytest.raises(ShapeError):
        apply_q_right(wy, np.zeros((2, 4)))


def test_apply_empty_is_noop():
    wy = CompactWY(np.zeros((3, 0)), np.zeros((0, 0)))
    B = np.ones((3, 2))
    assert np.array_equal(apply_qt_left(wy, B), np.ones((3, 2)))


# -- triangular-dense QR ----------------------------------------------------------

def td_pair(r, b):
    """Upper-triangular R with non-negative diagonal (as any R from hqr) and dense D."""
    R = np.asfortranarray(np.triu(r.standard_normal((b, b))))
    R[np.diag_indices(b)] = np.abs(R[np.diag_indices(b)])
    D = np.asfortranarray(r.standard_normal((b, b)))
    return R, D


def stacked_q(f):
    """Explicit 2b x 2b Q of a td factor from its structured reflectors [e_j; d_j]."""
    b = f.R_top.shape[1]
    Q = np.eye(2 * b)
    for j in range(b):
        v = np.zeros(2 * b)
        v[j] = 1.0
        v[b:] = f.D_house[:, j]
        Q = Q @ (np.eye(2 * b) - f.tau[j] * np.outer(v, v))
    return Q


def test_td_zero_block():
    r = np.random.default_rng(1)
    R, _ = td_pair(r, 4)
    R0 = R.copy()
    f = comp_td_qr(R, np.zeros((4, 4), order="F"))
    assert np.all(f.tau == 0)
    assert np.array_equal(f.R_top, R0)


def test_td_zero_block_negative_diagonal_flips_sign():
    R = np.asfortranarray(np.diag([2.0, -3.0]))
    f = comp_td_qr(R, np.zeros((2, 2), order="F"))
    assert list(f.tau) == [0.0, 2.0]
    assert np.array_equal(np.diag(f.R_top), [2.0, 3.0])


def test_td_zero_top_recovers_triangular_d(rng):
    D = np.asfortranarray(np.triu(rng.standard_normal((4, 4))))
    D[np.diag_indices(4)] = np.abs(D[np.diag_indices(4)]) + 1
    D0 = D.copy()
    f = comp_td_qr(np.zeros((4, 4), order="F"), D)
    assert np.allclose(np.abs(np.triu(f.R_top)), np.abs(D0), atol=1e-13)


@pytest.mark.parametrize("b", [1, 2, 4, 8, 16])
def test_td_matches_stacked_hqr(rng, b):
    R, D = td_pair(rng, b)
    stacked = np.vstack([R, D])
    ref = np.abs(sla.qr(stacked, mode="r")[0][:b])
    f = comp_td_qr(R, D)
    assert np.max(np.abs(np.abs(np.triu(f.R_top)) - ref)) <= 1e-12 * np.max(ref)
    assert np.all(np.diag(f.R_top) >= 0)


def test_td_factor_reconstructs(rng):
    R, D = td_pair(rng, 6)
    stacked = np.vstack([R, D])
    f = comp_td_qr(R, D)
    Q = stacked_q(f)
    assert orth_err(Q) <= 100 * 12 * EPS
    assert np.allclose(Q[:, :6] @ np.triu(f.R_top), stacked, atol=1e-13)


def test_td_only_upper_triangle_touched(rng):
    R, D = td_pair(rng, 5)
    R[np.tril_indices(5, -1)] = 99.0
    f = comp_td_qr(R, D)
    assert np.all(f.R_top[np.tril_indices(5, -1)] == 99.0)


def test_td_wy_orthogonal(rng):
    R, D = td_pair(rng, 8)
    f = comp_td_qr(R, D)
    W, T = f.W, f.Twy
    Q = np.eye(16) - W @ T @ W.T
    assert orth_err(Q) <= 100 * 8 * EPS
    assert np.allclose(Q, stacked_q(f), atol=1e-13)


def test_td_apply_left_vs_explicit(rng):
    R, D = td_pair(rng, 4)
    f = comp_td_qr(R, D)
    Q = stacked_q(f)
    top, bot = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
    want = Q.T @ np.vstack([top, bot])
    T, B = np.asfortranarray(top.copy()), np.asfortranarray(bot.copy())
    apply_qt_left_td(f, T, B)
    assert np.max(np.abs(np.vstack([T, B]) - want)) <= 1e-13


def test_td_apply_right_vs_explicit(rng):
    R, D = td_pair(rng, 4)
    f = comp_td_qr(R, D)
    Q = stacked_q(f)
    left, right = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
    want = np.hstack([left, right]) @ Q
    L, Rt = np.asfortranarray(left.copy()), np.asfortranarray(right.copy())
    apply_q_right_td(f, L, Rt)
    assert np.max(np.abs(np.hstack([L, Rt]) - want)) <= 1e-13


def test_td_apply_trivial_cases(rng):
    R, _ = td_pair(rng, 3)
    f = comp_td_qr(R, np.zeros((3, 3), order="F"))
    top, bot = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
    T, B = np.asfortranarray(top.copy()), np.asfortranarray(bot.copy())
    apply_qt_left_td(f, T, B)
    assert np.array_equal(T, top) and np.array_equal(B, bot)
    apply_qt_left_td(f, np.zeros((3, 0)), np.zeros((3, 0)))
    Z1, Z2 = np.zeros((4, 3), order="F"), np.zeros((4, 3), order="F")
    R2, D2 = td_pair(rng, 3)
    apply_q_right_td(comp_td_qr(R2, D2), Z1, Z2)
    assert not Z1.any() and not Z2.any()


def test_td_shape_errors(rng):
    with pytest.raises(ShapeError):
        comp_td_qr(np.zeros((3, 3)), np.zeros((3, 2)))
    R, D = td_pair(rng, 3)
    f = comp_td_qr(R, D)
    with pytest.raises(ShapeError):
        apply_qt_left_td(f, np.zeros((2, 2)), np.zeros((3, 2)))
    with pytest.raises(ShapeError):
        apply_q_right_td(f, np.zeros((2, 3)), np.zeros((2, 2)))


@given(st.sampled_from([2, 4, 8, 16]), st.integers(0, 2**31))
def test_td_abs_r_property(b, seed):
    r = np.random.default_rng(seed)
    R, D = td_pair(r, b)
    ref = np.abs(sla.qr(np.vstack([R, D]), mode="r")[0][:b])
    got = np.abs(np.triu(comp_td_qr(R, D).R_top))
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(ref)


def test_qr_by_blocks_first_column(rng):
    """First block column of a 3x3-block matrix via dense QR plus two td QRs,
    with the left applications to the trailing block columns, equals plain QR."""
    from randutv.householder import apply_qt_left_td_raw

    b = 4
    A = rng.standard_normal((3 * b, 3 * b))
    T = np.array(A, order="F")
    blk = lambda i, j: T[i * b:(i + 1) * b, j * b:(j + 1) * b]
    h = hqr(blk(0, 0))
    wy = form_compact_wy(h)
    for j in (1, 2):
        apply_qt_left(wy, blk(0, j))
    for i in (1, 2):
        f = comp_td_qr(blk(0, 0)[:, :], blk(i, 0))
        for j in (1, 2):
            apply_qt_left_td_raw(f.D_house, f.Twy, blk(0, j), blk(i, j))
    ref = sla.qr(A, mode="r")[0]
    assert np.max(np.abs(np.abs(np.triu(blk(0, 0))) - np.abs(ref[:b, :b]))) <= 1e-12 * np.max(np.abs(ref))
    assert np.max(np.abs(np.abs(T[:b, b:]) - np.abs(ref[:b, b:]))) <= 1e-12 * np.max(np.abs(ref))
