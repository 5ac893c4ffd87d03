"""Two-phase task runtime: dependence analysis, then dependence-respecting dispatch.

Analysis walks the task stream in emission order and links every task to the
earlier tasks it conflicts with on some block (read-after-write,
write-after-read, write-after-write). Dispatch runs tasks on a fixed pool of
threads; a task becomes ready once all of its predecessors finished, and free
workers always claim the ready task with the lowest emission index.
"""
from __future__ import annotations

import heapq
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import GraphError, TaskError


@dataclass
class TaskGraph:
    nodes: list
    succ: list[list[int]]
    indegree: list[int]

    @property
    def edges(self) -> set[tuple[int, int]]:
        return {(a, b) for a, out in enumerate(self.succ) for b in out}

    def __len__(self):
        return len(self.nodes)

    @classmethod
    def from_edges(cls, nodes: Sequence, edges: Iterable[tuple[int, int]]) -> "TaskGraph":
        n = len(nodes)
        succ = [set() for _ in range(n)]
        for a, b in edges:
            if not (0 <= a < b < n):
                raise GraphError(f"edge {a}->{b} does not point forward in emission order")
            succ[a].add(b)
        succ_l = [sorted(s) for s in succ]
        indeg = [0] * n
        for out in succ_l:
            for b in out:
                indeg[b] += 1
        return cls(list(nodes), succ_l, indeg)


@dataclass(frozen=True)
class TraceEvent:
    task_index: int
    worker: int
    start_ns: int
    end_ns: int


def build_dag(tasks: Sequence, known=None) -> TaskGraph:
    """Dependence graph of a task stream.

    Each task needs ``inputs`` and ``inouts`` operand sequences. When `known`
    is given, every operand must be a member of it.
    """
    last_writer: dict = {}
    readers: dict = {}
    edges: list[set[int]] = [set() for _ in tasks]
    for idx, t in enumerate(tasks):
        if known is not None:
            for op in (*t.inputs, *t.inouts):
                if op not in known:
                    raise GraphError(f"task {idx} ({t}) references unknown block {op}")
        for op in t.inputs:
            w = last_writer.get(op)
            if w is not None:
                edges[w].add(idx)
            readers.setdefault(op, []).append(idx)
        for op in t.inouts:
            w = last_writer.get(op)
            if w is not None:
                edges[w].add(idx)
            for r in readers.pop(op, ()):
                if r != idx:
                    edges[r].add(idx)
            last_writer[op] = idx
    return TaskGraph.from_edges(tasks, ((a, b) for a, out in enumerate(edges) for b in out))


def execute(g: TaskGraph, workers: int, kernel: Callable, clock=time.perf_counter_ns) -> list[TraceEvent]:
    """Run every task of `g` exactly once; returns the trace in completion order.

    A kernel exception stops further dispatch; running tasks finish, then a
    TaskError naming the failing task is raised.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n = len(g.nodes)
    pending = list(g.indegree)
    ready = [i for i in range(n) if pending[i] == 0]
    heapq.heapify(ready)
    events: list[TraceEvent] = []
    state = {"remaining": n, "running": 0, "failure": None}
    cond = threading.Condition()

    def worker(wid: int) -> None:
        while True:
            with cond:
                while not ready and state["remaining"] and state["failure"] is None:
                    if state["running"] == 0:
                        state["failure"] = (None, GraphError("dispatch stalled: graph has a cycle"))
                        cond.notify_all()
                        return
                    cond.wait()
                if state["failure"] is not None or not state["remaining"]:
                    return
                idx = heapq.heappop(ready)
                state["running"] += 1
            start = clock()
            try:
                kernel(g.nodes[idx])
            except BaseException as exc:  # surfaced to the caller below
                with cond:
                    state["running"] -= 1
                    if state["failure"] is None:
                        state["failure"] = (idx, exc)
                    cond.notify_all()
                return
            end = clock()
            with cond:
                events.append(TraceEvent(idx, wid, start, end))
                state["running"] -= 1
                state["remaining"] -= 1
                for s in g.succ[idx]:
                    pending[s] -= 1
                    if pending[s] == 0:
                        heapq.heappush(ready, s)
                cond.notify_all()

    if workers == 1:
        worker(0)
    else:
        threads = [threading.Thread(target=worker, args=(w,), daemon=True) for w in range(workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

    failure = state["failure"]
    if failure is not None:
        idx, exc = failure
        if idx is None:
            raise exc
        raise TaskError(f"task {idx} ({g.nodes[idx]}) failed: {exc!r}", idx, g.nodes[idx]) from exc
    return events


def is_linear_extension(g: TaskGraph, order: Sequence[int]) -> bool:
    if sorted(order) != list(range(len(g))):
        return False
    pos = {t: k for k, t in enumerate(order)}
    return all(pos[a] < pos[b] for a, b in g.edges)


def replay(g: TaskGraph, order: Sequence[int], kernel: Callable) -> None:
    """Re-run a recorded execution order on the calling thread."""
    if not is_linear_extension(g, order):
        raise GraphError("recorded order violates the task dependences")
    for idx in order:
        try:
            kernel(g.nodes[idx])
        except Exception as exc:
            raise TaskError(f"task {idx} ({g.nodes[idx]}) failed on replay: {exc!r}", idx, g.nodes[idx]) from exc


def trace_order(events: Sequence[TraceEvent]) -> list[int]:
    return [e.task_index for e in sorted(events, key=lambda e: (e.start_ns, e.task_index))]


def max_concurrency(events: Sequence[TraceEvent]) -> int:
    """Largest number of tasks whose [start, end) intervals overlap."""
    marks = []
    for e in events:
        marks.append((e.start_ns, 1))
        marks.append((e.end_ns, -1))
    marks.sort(key=lambda m: (m[0], m[1]))
    best = cur = 0
    for _, d in marks:
        cur += d
        best = max(best, cur)
    return best


TRACE_HEADER = "task_index,kind,worker,start_ns,end_ns"


def export_trace(events: Sequence[TraceEvent], path, tasks: Sequence | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for e in sorted(events, key=lambda e: (e.start_ns, e.task_index)):
            kind = ""
            if tasks is not None:
                k = getattr(tasks[e.task_index], "kind", "")
                kind = getattr(k, "value", str(k))
            fh.write(f"{e.task_index},{kind},{e.worker},{e.start_ns},{e.end_ns}\n")


def read_trace(path) -> list[tuple[TraceEvent, str]]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line == TRACE_HEADER:
                continue
            idx, kind, wid, start, end = line.split(",")
            out.append((TraceEvent(int(idx), int(wid), int(start), int(end)), kind))
    return out
