from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import EPS, fro, orth_err
from randutv.ab import (BASE_KINDS, EXTENSION_KINDS, BlockId, BlockStorage, Task, TaskKind, analyze,
                        execute_task, randutv_ab, transcript)
from randutv.blocked import UTVConfig, randutv, reconstruct
from randutv.errors import TaskError
from randutv.scheduler import build_dag

DATA = Path(__file__).parent / "data"
NO_UV = dict(build_u=False, build_v=False)


def sv(A):
    return np.linalg.svd(A, compute_uv=False)


def test_transcript_matches_reference():
    got = transcript(analyze((8, 8), UTVConfig(b=4, q=0, **NO_UV)))
    assert got == (DATA / "analyzer_2x2_q0.txt").read_text()


def test_transcript_depends_only_on_block_counts():
    a = transcript(analyze((8, 8), UTVConfig(b=4, q=0, **NO_UV)))
    b = transcript(analyze((256, 256), UTVConfig(b=128, q=0, **NO_UV)))
    assert a.replace("step", "") == b.replace("step", "")


def test_two_block_stream_head_and_count():
    tasks = analyze((8, 8), UTVConfig(b=4, q=0, **NO_UV))
    assert len(tasks) == 24
    assert [t.kind for t in tasks[:2]] == [TaskKind.Generate_normal_random] * 2
    assert [str(t.inouts[0]) for t in tasks[:2]] == ["G(0)", "G(1)"]
    assert tasks[-1].kind is TaskKind.Gemm_aabt


def test_closed_kind_set_without_extensions():
    assert len(BASE_KINDS) == 15
    for shape, b in [((8, 8), 4), ((24, 16), 4), ((12, 20), 4)]:
        kinds = {t.kind for t in analyze(shape, UTVConfig(b=b, q=0, **NO_UV))}
        assert kinds <= BASE_KINDS


def test_extension_kinds_only_for_power_iteration_and_u():
    kinds = {t.kind for t in analyze((12, 12), UTVConfig(b=4, q=1))}
    assert kinds & EXTENSION_KINDS == set(EXTENSION_KINDS)
    kinds = {t.kind for t in analyze((12, 12), UTVConfig(b=4, q=1, build_u=False))}
    assert TaskKind.Gemm_aab not in kinds


def test_single_block_is_plain_svd():
    tasks = analyze((4, 4), UTVConfig(b=4, q=0, **NO_UV))
    assert [t.kind for t in tasks] == [TaskKind.Svd_of_block]
    A = np.random.default_rng(0).standard_normal((4, 4))
    res = randutv_ab(A, UTVConfig(b=4, q=0))
    assert np.array_equal(res.T, np.diag(np.diag(res.T)))
    assert np.allclose(np.diag(res.T), sv(A), rtol=1e-13)


def test_operands_disjoint_and_steps_monotone():
    tasks = analyze((40, 28), UTVConfig(b=8, q=2))
    steps = [t.step for t in tasks]
    assert steps == sorted(steps)
    for t in tasks:
        assert not set(t.inputs) & set(t.inouts)
    with pytest.raises(ValueError):
        Task(TaskKind.Copy, (BlockId("T", 0, 0),), (BlockId("T", 0, 0),), 0)


def test_y0_accumulation_depends_on_initialization():
    tasks = analyze((8, 8), UTVConfig(b=4, q=0, **NO_UV))
    g = build_dag(tasks)
    # 0-based rows 2 and 4: Gemm_tn_oz and Gemm_tn_oo on Y(0)
    assert tasks[2].kind is TaskKind.Gemm_tn_oz and tasks[4].kind is TaskKind.Gemm_tn_oo
    assert (2, 4) in g.edges


# -- kernels ---------------------------------------------------------------------

def storage_for(T, b):
    return BlockStorage(np.asfortranarray(T), None, None, b)


def test_set_to_zero_and_keep_upper(rng):
    st_ = storage_for(rng.standard_normal((8, 8)), 4)
    execute_task(Task(TaskKind.Set_to_zero, (), (BlockId("T", 1, 0),), 0), st_)
    assert fro(st_[BlockId("T", 1, 0)]) == 0.0
    execute_task(Task(TaskKind.Keep_upper_triang, (), (BlockId("T", 0, 0),), 0), st_)
    assert not np.any(np.tril(st_[BlockId("T", 0, 0)], -1))


def test_copy(rng):
    st_ = storage_for(rng.standard_normal((8, 8)), 4)
    execute_task(Task(TaskKind.Copy, (BlockId("T", 0, 1),), (BlockId("E", 0),), 0), st_)
    assert np.array_equal(st_[BlockId("E", 0)], st_[BlockId("T", 0, 1)])
    st_[BlockId("T", 0, 1)][0, 0] += 1
    assert not np.array_equal(st_[BlockId("E", 0)], st_[BlockId("T", 0, 1)])


def test_gemm_tn_accumulation_equals_fused(rng):
    from test_matrix import triple_loop

    A = rng.standard_normal((8, 4))
    st_ = storage_for(A, 4)
    G = st_.grids["G"].parent
    G[...] = rng.standard_normal(G.shape)
    Y = BlockId("Y", 0)
    execute_task(Task(TaskKind.Gemm_tn_oz, (BlockId("T", 0, 0), BlockId("G", 0)), (Y,), 0), st_)
    execute_task(Task(TaskKind.Gemm_tn_oo, (BlockId("T", 1, 0), BlockId("G", 1)), (Y,), 0), st_)
    want = triple_loop(1.0, True, A, False, G, 0.0, np.zeros((4, 4)))
    assert np.allclose(st_[Y], want, rtol=1e-15, atol=1e-15)


def test_arity_mismatch_is_task_error(rng):
    st_ = storage_for(rng.standard_normal((8, 8)), 4)
    with pytest.raises(TaskError):
        execute_task(Task(TaskKind.Copy, (), (BlockId("E", 0),), 0), st_)


def test_missing_operand_is_task_error(rng):
    st_ = storage_for(rng.standard_normal((8, 8)), 4)
    bad = Task(TaskKind.Apply_left_Qt_of_dense_QR, (BlockId("D", 0), BlockId("X", 0, 0)),
               (BlockId("T", 0, 1),), 0)
    with pytest.raises(TaskError) as exc:
        execute_task(bad, st_)
    assert exc.value.task is bad


# -- end to end --------------------------------------------------------------------

def test_identity_parallel():
    res = randutv_ab(np.eye(8), UTVConfig(b=4, q=0), workers=4)
    assert np.allclose(np.diag(res.T), 1.0, atol=1e-14)


def test_workers_bitwise_equal(rng):
    A = rng.standard_normal((96, 96))
    cfg = UTVConfig(b=16, q=1, seed=5)
    r1, r4 = randutv_ab(A, cfg, workers=1), randutv_ab(A, cfg, workers=4)
    for x in "TUV":
        assert np.array_equal(getattr(r1, x), getattr(r4, x))


def test_spectrum_96(rng):
    A = rng.standard_normal((96, 96))
    res = randutv_ab(A, UTVConfig(b=16, q=1))
    assert np.max(np.abs(sv(res.T) - sv(A))) <= 1e-11 * sv(A)[0]


def test_same_sketch_as_blocked(rng):
    """Both drivers draw identical Gaussian panels, so the first diagonal
    block agrees closely even though the Householder structure differs."""
    A = rng.standard_normal((48, 48))
    cfg = UTVConfig(b=16, q=2, seed=9)
    d_ab = np.diag(randutv_ab(A, cfg).T)[:16]
    d_bl = np.diag(randutv(A, cfg).T)[:16]
    assert np.allclose(d_ab, d_bl, rtol=1e-8)


@given(st.integers(1, 36), st.integers(1, 36), st.integers(2, 10), st.integers(0, 2),
       st.integers(1, 4), st.integers(0, 2**31))
def test_factorization_valid_any_shape(m, n, b, q, workers, seed):
    A = np.random.default_rng(seed).standard_normal((m, n))
    res = randutv_ab(A, UTVConfig(b=b, q=q, seed=seed), workers=workers)
    lim = 100 * max(m, n) * EPS
    assert fro(A - reconstruct(res)) <= lim * fro(A)
    assert orth_err(res.U) <= lim and orth_err(res.V) <= lim
    assert not np.any(np.tril(res.T, -1))
    assert np.max(np.abs(sv(res.T) - sv(A))) <= 1e-11 * sv(A)[0]


def test_no_uv_same_t(rng):
    A = rng.standard_normal((32, 24))
    cfg = UTVConfig(b=8, q=1, seed=2)
    full = randutv_ab(A, cfg)
    bare = randutv_ab(A, UTVConfig(b=8, q=1, seed=2, **NO_UV))
    assert bare.U is None and bare.V is None
    assert np.array_equal(full.T, bare.T)


def test_trace_collected(rng):
    events = []
    tasks = analyze((32, 32), UTVConfig(b=8, q=1))
    randutv_ab(rng.standard_normal((32, 32)), UTVConfig(b=8, q=1), workers=2, trace=events)
    assert sorted(e.task_index for e in events) == list(range(len(tasks)))
