"""Self-checks run by ``randutv verify``.

Each check returns a `CheckResult`; the CLI prints one line per check and
exits non-zero if any failed. ``fast`` uses reduced sizes and counts, ``full``
runs the acceptance-scale versions.
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from . import ab, blockcyclic, scheduler
from .blocked import UTVConfig, randutv, reconstruct
from .householder import comp_td_qr, hqr
from .matrix import EPS, RngState, frobenius_norm, generate_normal_random
from .metrics import diag_accuracy, lowrank_error, make_test_matrix, optimal_error, scaled_time
from .svd import svd_dense

FACTOR_SHAPES = [(64, 64), (96, 48), (48, 96), (100, 64)]


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float = 0.0


def orthogonality_error(Q) -> float:
    return frobenius_norm(Q.T @ Q - np.eye(Q.shape[1]))


def factorization_errors(A, res) -> tuple[float, float, float]:
    """(relative reconstruction error, ||U^T U - I||_F, ||V^T V - I||_F)."""
    rec = frobenius_norm(A - reconstruct(res)) / frobenius_norm(A)
    return rec, orthogonality_error(res.U), orthogonality_error(res.V)


def spectrum_error(A, res, sigma=None) -> float:
    """max |sigma_i(T) - sigma_i(A)| / sigma_1(A)."""
    s = svd_dense(A).D if sigma is None else sigma
    t = svd_dense(res.T).D
    if s[0] == 0:
        return float(np.max(np.abs(t)))
    return float(np.max(np.abs(t - s)) / s[0])


def _run(algo, A, cfg):
    if algo == "ab":
        return ab.randutv_ab(A, cfg, workers=2)
    return randutv(A, cfg)


def check_factorizations(full: bool) -> CheckResult:
    shapes = FACTOR_SHAPES if full else [(64, 64), (100, 64)]
    qs = (0, 1, 2) if full else (1,)
    worst_rec = worst_orth = worst_spec = 0.0
    failures = []
    n_cases = 0
    for m, n in shapes:
        A = generate_normal_random(RngState(m * 1000 + n), m, n)
        sigma = svd_dense(A).D
        for b in (8, 16):
            for q in qs:
                for algo in ("blocked", "ab"):
                    res = _run(algo, A, UTVConfig(b=b, q=q, seed=7))
                    rec, ou, ov = factorization_errors(A, res)
                    spec = spectrum_error(A, res, sigma)
                    lim = 100 * max(m, n) * EPS
                    n_cases += 1
                    worst_rec = max(worst_rec, rec / lim)
                    worst_orth = max(worst_orth, max(ou, ov) / lim)
                    worst_spec = max(worst_spec, spec)
                    if rec > lim or ou > lim or ov > lim or spec > 1e-11:
                        failures.append(f"{algo} {m}x{n} b={b} q={q}")
    detail = (f"{n_cases} cases; worst reconstruction {worst_rec:.3f}x and orthogonality "
              f"{worst_orth:.3f}x of the bound, spectrum {worst_spec:.1e}")
    if failures:
        detail += "; failing: " + ", ".join(failures)
    return CheckResult("factorization and spectrum", not failures, detail)


def reference_transcript() -> str:
    return resources.files("randutv").joinpath("data/analyzer_2x2_q0.txt").read_text()


def check_transcript(full: bool) -> CheckResult:
    got = ab.transcript(ab.analyze((8, 8), UTVConfig(b=4, q=0, build_u=False, build_v=False)))
    want = reference_transcript()
    ok = got == want
    n = got.count("\n")
    return CheckResult("analyzer transcript (2x2 blocks, q=0)", ok,
                       f"{n} tasks" + ("" if ok else ", differs from the reference"))


def check_determinism(full: bool) -> CheckResult:
    n, b = (192, 32) if full else (96, 16)
    seeds = range(5) if full else range(2)
    counts = (1, 2, 4, 8) if full else (1, 4)
    bad = []
    for seed in seeds:
        A = generate_normal_random(RngState(100 + seed), n, n)
        cfg = UTVConfig(b=b, q=1, seed=seed)
        ref = ab.randutv_ab(A, cfg, workers=counts[0])
        for w in counts[1:]:
            res = ab.randutv_ab(A, cfg, workers=w)
            if not all(np.array_equal(getattr(ref, x), getattr(res, x)) for x in "TUV"):
                bad.append(f"seed={seed} workers={w}")
    return CheckResult("schedule determinism", not bad,
                       f"{n}x{n}, b={b}, workers {list(counts)}, {len(seeds)} seeds"
                       + (f"; mismatch: {bad}" if bad else ""))


def random_dag(rng: random.Random, max_nodes: int = 200) -> scheduler.TaskGraph:
    n = rng.randint(1, max_nodes)
    p = rng.choice((0.0, 0.01, 0.05, 0.2))
    edges = [(a, b) for b in range(n) for a in range(max(0, b - 30), b) if rng.random() < p]
    return scheduler.TaskGraph.from_edges(list(range(n)), edges)


def trace_respects(g: scheduler.TaskGraph, events) -> bool:
    """Exactly-once plus end(a) <= start(b) for every edge."""
    if sorted(e.task_index for e in events) != list(range(len(g))):
        return False
    by = {e.task_index: e for e in events}
    return all(by[a].end_ns <= by[b].start_ns for a, b in g.edges)


def check_dag_fuzz(full: bool) -> CheckResult:
    runs = 1000 if full else 150
    rng = random.Random(2024)
    bad = 0
    for _ in range(runs):
        g = random_dag(rng)
        events = scheduler.execute(g, rng.randint(1, 8), lambda t: None)
        if not trace_respects(g, events):
            bad += 1
    return CheckResult("scheduler fuzz", bad == 0, f"{runs} random DAGs, {bad} invalid traces")


def check_td_qr(full: bool) -> CheckResult:
    runs = 100 if full else 20
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(runs):
        b = int(rng.choice([2, 4, 8, 16]))
        R = np.asfortranarray(np.triu(rng.standard_normal((b, b))))
        D = np.asfortranarray(rng.standard_normal((b, b)))
        stacked = np.asfortranarray(np.vstack([R, D]))
        hqr(stacked)
        want = np.abs(np.triu(stacked[:b]))
        f = comp_td_qr(R, D)
        got = np.abs(np.triu(f.R_top))
        worst = max(worst, float(np.max(np.abs(got - want)) / np.max(want)))
    return CheckResult("td-QR vs stacked QR", worst <= 1e-12, f"{runs} instances, worst {worst:.1e}")


def check_block_cyclic(full: bool) -> CheckResult:
    spec = blockcyclic.GridSpec(4, 4, 2, 3)
    owners = blockcyclic.owner_map(spec, 16, 24)
    expected = np.array([[0, 1, 2, 0, 1, 2], [3, 4, 5, 3, 4, 5]] * 2)
    counts = blockcyclic.distribution_report(spec, 16, 24)
    ok = np.array_equal(owners, expected) and counts == [64] * 6
    return CheckResult("block-cyclic 16x24 on 2x3 grid", ok, f"per-process elements {counts}")


def check_scaled_time(full: bool) -> CheckResult:
    v = scaled_time(216.7, 25600)
    ok = abs(v - 216.7 / 25600**3 * 1e10) == 0 and abs(v - 0.1291) < 1e-4
    return CheckResult("scaled-time arithmetic", ok, f"216.7 s at n=25600 -> {v:.4f}")


def near_optimality(seeds=range(20), n: int = 200, b: int = 20, beta: float = 0.8):
    """Median over seeds of err_utv/err_opt (Frobenius) per block boundary k,
    and the median of max diag_accuracy for q=0 and q=2."""
    A = make_test_matrix(f"geometric({beta})", n, n, seed=1)
    sigma = svd_dense(A).D
    ks = list(range(b, n, b))
    ratios = {2: [], 0: []}
    diag = {2: [], 0: []}
    for q in (2, 0):
        for s in seeds:
            res = randutv(A, UTVConfig(b=b, q=q, seed=s))
            if q == 2:
                ratios[q].append([lowrank_error(A, res, k) / optimal_error(A, k, sigma=sigma) for k in ks])
            diag[q].append(diag_accuracy(A, res, sigma).max())
    med_ratio = np.median(np.array(ratios[2]), axis=0)
    return ks, med_ratio, float(np.median(diag[2])), float(np.median(diag[0]))


def check_near_optimality(full: bool) -> CheckResult:
    ks, med, d2, d0 = near_optimality(range(20) if full else range(5))
    bad = [k for k, r in zip(ks, med) if not r <= 1.5]
    detail = ("median ratio per k: " + " ".join(f"{k}:{r:.3g}" for k, r in zip(ks, med))
              + f"; median max diag error q=2 {d2:.2e} vs q=0 {d0:.2e}")
    return CheckResult("near-optimal low-rank error", not bad and d2 <= d0, detail)


FAST: list[Callable[[bool], CheckResult]] = [
    check_factorizations, check_transcript, check_determinism, check_dag_fuzz,
    check_td_qr, check_block_cyclic, check_scaled_time,
]
FULL = FAST + [check_near_optimality]


def run_checks(level: str = "fast") -> list[CheckResult]:
    full = level == "full"
    out = []
    for fn in (FULL if full else FAST):
        t0 = time.perf_counter()
        try:
            r = fn(full)
        except Exception as exc:  # a crashing check is a failed check
            r = CheckResult(fn.__name__, False, f"raised {exc!r}")
        r.seconds = time.perf_counter() - t0
        out.append(r)
    return out
