"""Algorithm-by-blocks randUTV.

The matrix is tiled into b x b blocks and every step of the blocked algorithm
is restated as small tasks over a few blocks each. `analyze` emits the task
stream, `execute_task` runs one task, and `randutv_ab` hands the stream to
the scheduler.

Operands are `BlockId`s. T, U and V blocks are addressed by (block row, block
col); the sketch G and sample Y are single block columns addressed by block
row. Scratch blocks are fresh per step and addressed by (step, index):

    S(i,c)  Twy factors of the QR of Y (c = i dense, c > i triangular-dense)
    E(i)    copy of the dense reflectors of Y(i)
    X(i,r)  Twy factors of the QR of the panel T(i:, i)
    D(i)    copy of the dense reflectors of T(i,i)
    P(i)    left singular vectors of T(i,i)
    Q(i)    right singular vectors of T(i,i), stored transposed

Emission order inside a step: sketch, power iterations, QR of Y (dense, copy,
triangular-dense), right applications to T (V accumulation right after each
T application group), panel QR, left applications to T (U accumulation right
after each group), clean-up of the panel, block SVD and its propagation.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .blocked import UTVConfig, UTVResult, sketch_offset
from .errors import ConfigError, TaskError
from .householder import (CompactWY, apply_q_right, apply_q_right_td_raw, apply_qt_left,
                          apply_qt_left_td_raw, comp_td_qr, hqr, unit_lower, wy_factor)
from .matrix import BlockGrid, as_matrix, eye, gemm, matmul, normal_block, zeros
from .scheduler import TraceEvent, build_dag, execute
from .svd import svd_full


class TaskKind(str, enum.Enum):
    Generate_normal_random = "Generate_normal_random"
    Gemm_tn_oz = "Gemm_tn_oz"                  # C = A^T B
    Gemm_tn_oo = "Gemm_tn_oo"                  # C = C + A^T B
    Comp_dense_QR = "Comp_dense_QR"
    Comp_td_QR = "Comp_td_QR"
    Copy = "Copy"
    Apply_right_Q_of_dense_QR = "Apply_right_Q_of_dense_QR"
    Apply_right_Q_td_QR = "Apply_right_Q_td_QR"
    Apply_left_Qt_of_dense_QR = "Apply_left_Qt_of_dense_QR"
    Apply_left_Qt_of_td_QR = "Apply_left_Qt_of_td_QR"
    Keep_upper_triang = "Keep_upper_triang"
    Set_to_zero = "Set_to_zero"
    Svd_of_block = "Svd_of_block"
    Gemm_abta = "Gemm_abta"                    # A = B^T A
    Gemm_aabt = "Gemm_aabt"                    # A = A B^T
    # needed only for q > 0 and for U accumulation
    Gemm_nn_oz = "Gemm_nn_oz"                  # C = A B
    Gemm_nn_oo = "Gemm_nn_oo"                  # C = C + A B
    Gemm_aab = "Gemm_aab"                      # A = A B


BASE_KINDS = frozenset(list(TaskKind)[:15])
EXTENSION_KINDS = frozenset(TaskKind) - BASE_KINDS

_VECTOR_TAGS = {"G", "Y", "E", "D", "P", "Q"}
SCRATCH_TAGS = {"S", "E", "X", "D", "P", "Q"}


class BlockId(NamedTuple):
    tag: str
    i: int
    j: int = 0

    def __str__(self):
        if self.tag in _VECTOR_TAGS:
            return f"{self.tag}({self.i})"
        return f"{self.tag}({self.i},{self.j})"


@dataclass(frozen=True)
class Task:
    kind: TaskKind
    inputs: tuple
    inouts: tuple
    step: int
    params: tuple = ()

    def __post_init__(self):
        if set(self.inputs) & set(self.inouts):
            raise ValueError(f"{self.kind.value}: operand both read-only and written")

    def __str__(self):
        ins = ",".join(map(str, self.inputs))
        outs = ",".join(map(str, self.inouts))
        return f"{self.kind.value} in=[{ins}] inout=[{outs}] step={self.step}"


def transcript(tasks: Sequence[Task]) -> str:
    return "".join(f"{t}\n" for t in tasks)


# ---------------------------------------------------------------------------
# analysis

def _shape(A):
    if isinstance(A, tuple):
        return A
    return np.shape(A)


def analyze(A, cfg: UTVConfig) -> list[Task]:
    """Task stream of randUTV over b x b blocks.

    `A` may be the matrix itself or just its shape. When b does not divide
    m or n the last block row/column is thinner; the stream shape is the
    same.
    """
    m, n = _shape(A)
    b = cfg.b
    if m < 1 or n < 1:
        raise ConfigError(f"empty matrix {m}x{n}")
    M, N = -(-m // b), -(-n // b)
    K = TaskKind
    tasks: list[Task] = []

    def T(r, c):
        return BlockId("T", r, c)

    def emit(kind, inputs, inouts, step, params=()):
        tasks.append(Task(kind, tuple(inputs), tuple(inouts), step, params))

    for i in range(min(M, N)):
        rows = range(i, M)
        cols = range(i, N)
        G = [BlockId("G", r) for r in range(M)]
        Y = [BlockId("Y", c) for c in range(N)]

        if len(cols) > 1:
            base = sketch_offset(m, b, i)
            ld = m - i * b
            for r in rows:
                emit(K.Generate_normal_random, (), (G[r],), i, (cfg.seed, base, ld, (r - i) * b))
            for r in rows:
                for c in cols:
                    emit(K.Gemm_tn_oz if r == i else K.Gemm_tn_oo, (T(r, c), G[r]), (Y[c],), i)
            for _ in range(cfg.q):
                for c in cols:
                    for r in rows:
                        emit(K.Gemm_nn_oz if c == i else K.Gemm_nn_oo, (T(r, c), Y[c]), (G[r],), i)
                for r in rows:
                    for c in cols:
                        emit(K.Gemm_tn_oz if r == i else K.Gemm_tn_oo, (T(r, c), G[r]), (Y[c],), i)

            S = {c: BlockId("S", i, c) for c in cols}
            E = BlockId("E", i)
            emit(K.Comp_dense_QR, (), (Y[i], S[i]), i)
            emit(K.Copy, (Y[i],), (E,), i)
            for c in cols[1:]:
                emit(K.Comp_td_QR, (), (Y[i], Y[c], S[c]), i)
            for r in range(M):
                emit(K.Apply_right_Q_of_dense_QR, (E, S[i]), (T(r, i),), i)
            if cfg.build_v:
                for r in range(N):
                    emit(K.Apply_right_Q_of_dense_QR, (E, S[i]), (BlockId("V", r, i),), i)
            for c in cols[1:]:
                for r in range(M):
                    emit(K.Apply_right_Q_td_QR, (Y[c], S[c]), (T(r, i), T(r, c)), i)
                if cfg.build_v:
                    for r in range(N):
                        emit(K.Apply_right_Q_td_QR, (Y[c], S[c]),
                             (BlockId("V", r, i), BlockId("V", r, c)), i)

        if len(rows) > 1:
            X = {r: BlockId("X", i, r) for r in rows}
            D = BlockId("D", i)
            emit(K.Comp_dense_QR, (), (T(i, i), X[i]), i)
            emit(K.Copy, (T(i, i),), (D,), i)
            for r in rows[1:]:
                emit(K.Comp_td_QR, (), (T(i, i), T(r, i), X[r]), i)
            for c in cols[1:]:
                emit(K.Apply_left_Qt_of_dense_QR, (D, X[i]), (T(i, c),), i)
            if cfg.build_u:
                for r in range(M):
                    emit(K.Apply_right_Q_of_dense_QR, (D, X[i]), (BlockId("U", r, i),), i)
            for s in rows[1:]:
                for c in cols[1:]:
                    emit(K.Apply_left_Qt_of_td_QR, (T(s, i), X[s]), (T(i, c), T(s, c)), i)
                if cfg.build_u:
                    for r in range(M):
                        emit(K.Apply_right_Q_td_QR, (T(s, i), X[s]),
                             (BlockId("U", r, i), BlockId("U", r, s)), i)
            emit(K.Keep_upper_triang, (), (T(i, i),), i)
            for r in rows[1:]:
                emit(K.Set_to_zero, (), (T(r, i),), i)

        P, Q = BlockId("P", i), BlockId("Q", i)
        emit(K.Svd_of_block, (), (T(i, i), P, Q), i)
        for c in cols[1:]:
            emit(K.Gemm_abta, (P,), (T(i, c),), i)
        for r in range(i):
            emit(K.Gemm_aabt, (Q,), (T(r, i),), i)
        if cfg.build_u:
            for r in range(M):
                emit(K.Gemm_aab, (P,), (BlockId("U", r, i),), i)
        if cfg.build_v:
            for r in range(N):
                emit(K.Gemm_aabt, (Q,), (BlockId("V", r, i),), i)
    return tasks


# ---------------------------------------------------------------------------
# storage and kernels

class BlockStorage:
    """Resolves BlockIds to aliasing views of T, U, V, G, Y, or to scratch blocks.

    Scratch blocks are created by the task that produces them, so their shapes
    follow whatever block that task factored.
    """

    def __init__(self, T, U, V, b):
        self.b = b
        self.grids = {"T": BlockGrid(T, b)}
        if U is not None:
            self.grids["U"] = BlockGrid(U, b)
        if V is not None:
            self.grids["V"] = BlockGrid(V, b)
        self.grids["G"] = BlockGrid(zeros(T.shape[0], b), b)
        self.grids["Y"] = BlockGrid(zeros(T.shape[1], b), b)
        self.scratch: dict = {}

    def __contains__(self, bid):
        try:
            self[bid]
        except (KeyError, IndexError):
            return False
        return True

    def __getitem__(self, bid: BlockId) -> np.ndarray:
        if bid.tag in SCRATCH_TAGS:
            return self.scratch[bid]
        grid = self.grids[bid.tag]
        return grid.block(bid.i, bid.j)

    def put(self, bid: BlockId, value: np.ndarray) -> None:
        if bid.tag not in SCRATCH_TAGS:
            raise KeyError(f"{bid} is not a scratch block")
        self.scratch[bid] = np.array(value, order="F", dtype=np.float64)


_ARITY = {
    TaskKind.Generate_normal_random: (0, 1),
    TaskKind.Gemm_tn_oz: (2, 1), TaskKind.Gemm_tn_oo: (2, 1),
    TaskKind.Gemm_nn_oz: (2, 1), TaskKind.Gemm_nn_oo: (2, 1),
    TaskKind.Comp_dense_QR: (0, 2), TaskKind.Comp_td_QR: (0, 3),
    TaskKind.Copy: (1, 1),
    TaskKind.Apply_right_Q_of_dense_QR: (2, 1), TaskKind.Apply_right_Q_td_QR: (2, 2),
    TaskKind.Apply_left_Qt_of_dense_QR: (2, 1), TaskKind.Apply_left_Qt_of_td_QR: (2, 2),
    TaskKind.Keep_upper_triang: (0, 1), TaskKind.Set_to_zero: (0, 1),
    TaskKind.Svd_of_block: (0, 3),
    TaskKind.Gemm_abta: (1, 1), TaskKind.Gemm_aabt: (1, 1), TaskKind.Gemm_aab: (1, 1),
}


def execute_task(t: Task, storage, tol: float | None = None) -> None:
    """Run one task against `storage`, mutating only its in/out operands.

    Reflector blocks may be narrower than tall (ragged last column); the
    structured reflectors then only touch the leading k rows/columns of the
    top/left operand, k being the number of reflectors.
    """
    want = _ARITY.get(t.kind)
    if want is None or (len(t.inputs), len(t.inouts)) != want:
        raise TaskError(f"{t.kind}: expected {want} (in, inout) operands, "
                        f"got ({len(t.inputs)}, {len(t.inouts)})", task=t)
    try:
        _dispatch(t, storage, tol)
    except (KeyError, IndexError) as exc:
        raise TaskError(f"{t}: operand not available ({exc})", task=t) from exc


def _dispatch(t: Task, storage, tol) -> None:
    K = TaskKind
    k = t.kind
    ins = [storage[x] for x in t.inputs]
    if k is K.Generate_normal_random:
        seed, base, ld, row0 = t.params
        G = storage[t.inouts[0]]
        G[...] = normal_block(seed, base, ld, row0, G.shape[0], G.shape[1])
    elif k in (K.Gemm_tn_oz, K.Gemm_tn_oo):
        gemm(1.0, True, ins[0], False, ins[1], 0.0 if k is K.Gemm_tn_oz else 1.0, storage[t.inouts[0]])
    elif k in (K.Gemm_nn_oz, K.Gemm_nn_oo):
        gemm(1.0, False, ins[0], False, ins[1], 0.0 if k is K.Gemm_nn_oz else 1.0, storage[t.inouts[0]])
    elif k is K.Comp_dense_QR:
        A = storage[t.inouts[0]]
        f = hqr(A)
        storage.put(t.inouts[1], wy_factor(unit_lower(A, f.tau.shape[0]), f.tau))
    elif k is K.Comp_td_QR:
        A, D = storage[t.inouts[0]], storage[t.inouts[1]]
        w = A.shape[1]
        storage.put(t.inouts[2], comp_td_qr(A[:w, :], D).Twy)
    elif k is K.Copy:
        storage.put(t.inouts[0], ins[0])
    elif k is K.Apply_right_Q_of_dense_QR:
        house, S = ins
        apply_q_right(CompactWY(unit_lower(house, S.shape[0]), S), storage[t.inouts[0]])
    elif k is K.Apply_left_Qt_of_dense_QR:
        house, S = ins
        apply_qt_left(CompactWY(unit_lower(house, S.shape[0]), S), storage[t.inouts[0]])
    elif k is K.Apply_right_Q_td_QR:
        house, S = ins
        left, right = (storage[x] for x in t.inouts)
        apply_q_right_td_raw(house, S, left[:, :S.shape[0]], right)
    elif k is K.Apply_left_Qt_of_td_QR:
        house, S = ins
        top, bot = (storage[x] for x in t.inouts)
        apply_qt_left_td_raw(house, S, top[:S.shape[0], :], bot)
    elif k is K.Keep_upper_triang:
        A = storage[t.inouts[0]]
        A[...] = np.triu(A)
    elif k is K.Set_to_zero:
        storage[t.inouts[0]][...] = 0.0
    elif k is K.Svd_of_block:
        A = storage[t.inouts[0]]
        s = svd_full(A) if tol is None else svd_full(A, tol)
        A[...] = 0.0
        A[np.arange(s.D.shape[0]), np.arange(s.D.shape[0])] = s.D
        storage.put(t.inouts[1], s.U)
        storage.put(t.inouts[2], s.V.T)
    elif k is K.Gemm_abta:
        A = storage[t.inouts[0]]
        A[...] = matmul(ins[0], A, transa=True)
    elif k is K.Gemm_aabt:
        A = storage[t.inouts[0]]
        A[...] = matmul(A, ins[0], transb=True)
    elif k is K.Gemm_aab:
        A = storage[t.inouts[0]]
        A[...] = matmul(A, ins[0])


def scratch_ids(tasks: Sequence[Task]) -> set:
    return {op for t in tasks for op in (*t.inputs, *t.inouts) if op.tag in SCRATCH_TAGS}


def randutv_ab(A, cfg: UTVConfig, workers: int = 1, trace: list | None = None) -> UTVResult:
    """randUTV through the task runtime.

    The output is bit-identical for every worker count: each block sees the
    same sequence of writes under any schedule the dependences allow. Trace
    events are appended to `trace` when a list is passed.
    """
    T = as_matrix(A)
    tasks = analyze(T.shape, cfg)
    m, n = T.shape
    U = eye(m) if cfg.build_u else None
    V = eye(n) if cfg.build_v else None
    storage = BlockStorage(T, U, V, cfg.b)
    g = build_dag(tasks)
    tol = cfg.tol

    def run(task):
        execute_task(task, storage, tol)

    events = execute(g, workers, run)
    if trace is not None:
        trace.extend(events)
    return UTVResult(T, U, V, cfg)


def traced_run(A, cfg: UTVConfig, workers: int) -> tuple[UTVResult, list[Task], list[TraceEvent]]:
    events: list[TraceEvent] = []
    res = randutv_ab(A, cfg, workers, events)
    return res, analyze(np.shape(res.T), cfg), events
