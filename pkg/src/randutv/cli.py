"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import os
import statistics
import sys
import time
from typing import Sequence


from . import ab, blockcyclic
from .blocked import UTVConfig, randutv
from .errors import RandUTVError
from .io import read_matrix, write_matrix
from .metrics import make_test_matrix, quality_report, scaled_time
from .scheduler import export_trace, max_concurrency

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_B = {"blocked": 128, "ab": 256}
BENCH_FIELDS = ["algo", "n", "b", "q", "workers", "build_uv", "repeat", "seconds", "scaled", "median"]


class UsageError(Exception):
    pass


def default_workers() -> int:
    env = os.environ.get("RANDUTV_WORKERS")
    if env:
        try:
            w = int(env)
        except ValueError:
            raise UsageError(f"RANDUTV_WORKERS must be an integer, got {env!r}") from None
        if w < 1:
            raise UsageError("RANDUTV_WORKERS must be >= 1")
        return w
    return os.cpu_count() or 1


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _config(args, algo: str) -> UTVConfig:
    b = args.b if args.b is not None else DEFAULT_B[algo]
    return UTVConfig(b=b, q=args.q, seed=args.seed, build_u=not args.no_uv, build_v=not args.no_uv)


def _factor(A, cfg: UTVConfig, algo: str, workers: int, trace: list | None = None):
    if algo == "ab":
        return ab.randutv_ab(A, cfg, workers=workers, trace=trace)
    return randutv(A, cfg)


# ---------------------------------------------------------------------------

def cmd_factorize(args) -> int:
    A = read_matrix(args.input)
    cfg = _config(args, args.algo)
    workers = args.workers or default_workers()
    events: list = []
    t0 = time.perf_counter()
    res = _factor(A, cfg, args.algo, workers, events if args.trace else None)
    secs = time.perf_counter() - t0
    prefix = args.out or os.path.splitext(args.input)[0]
    write_matrix(f"{prefix}_T.rutv", res.T)
    written = [f"{prefix}_T.rutv"]
    if res.U is not None:
        write_matrix(f"{prefix}_U.rutv", res.U)
        write_matrix(f"{prefix}_V.rutv", res.V)
        written += [f"{prefix}_U.rutv", f"{prefix}_V.rutv"]
    if args.trace:
        if args.algo != "ab":
            raise UsageError("--trace needs --algo ab")
        export_trace(events, args.trace, ab.analyze(A.shape, cfg))
        written.append(args.trace)
    if args.csv:
        if res.U is None:
            raise UsageError("--csv quality report needs U and V (drop --no-uv)")
        quality_report(A, res).to_csv(args.csv)
        written.append(args.csv)
    m, n = A.shape
    print(f"{args.algo} {m}x{n} b={cfg.b} q={cfg.q} seed={cfg.seed}: {secs:.3f} s")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def bench_rows(sizes, bs, qs, workers_list, repeats, algos, build_uv=True, seed=0):
    rows = []
    warm = make_test_matrix("gaussian", 16, 16, seed)
    for algo in algos:
        _factor(warm, UTVConfig(b=4, q=1), algo, 1)  # keep JIT compilation out of the timings
        for n in sizes:
            A = make_test_matrix("gaussian", n, n, seed)
            for b in bs:
                for q in qs:
                    for w in (workers_list if algo == "ab" else [1]):
                        cfg = UTVConfig(b=b, q=q, seed=seed, build_u=build_uv, build_v=build_uv)
                        group = []
                        for r in range(repeats):
                            t0 = time.perf_counter()
                            _factor(A, cfg, algo, w)
                            secs = time.perf_counter() - t0
                            group.append({"algo": algo, "n": n, "b": b, "q": q, "workers": w,
                                          "build_uv": int(build_uv), "repeat": r, "seconds": secs,
                                          "scaled": scaled_time(secs, n), "median": 0})
                        med = statistics.median_low([g["seconds"] for g in group])
                        next(g for g in group if g["seconds"] == med)["median"] = 1
                        rows.extend(group)
    return rows


def cmd_bench(args) -> int:
    algos = ["blocked", "ab"] if args.algo == "both" else [args.algo]
    bs = args.b_list or [DEFAULT_B[a] for a in algos][:1]
    workers = args.workers_list or [args.workers or default_workers()]
    rows = bench_rows(args.sizes, bs, args.q_list, workers, args.repeats, algos,
                      build_uv=not args.no_uv, seed=args.seed)
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=BENCH_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    finally:
        if args.csv:
            out.close()
    if args.csv:
        print(f"wrote {len(rows)} rows to {args.csv}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_checks

    results = run_checks(args.level)
    for r in results:
        print(f"[{'PASS' if r.ok else 'FAIL'}] {r.name}: {r.detail} ({r.seconds:.1f} s)")
    failed = sum(not r.ok for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_FAIL


def cmd_trace(args) -> int:
    cfg = _config(args, "ab")
    A = make_test_matrix("gaussian", args.n, args.n, args.seed)
    workers = args.workers or default_workers()
    events: list = []
    t0 = time.perf_counter()
    ab.randutv_ab(A, cfg, workers=workers, trace=events)
    secs = time.perf_counter() - t0
    out = args.out or "trace.csv"
    export_trace(events, out, ab.analyze(A.shape, cfg))
    print(f"{len(events)} tasks on {workers} workers in {secs:.3f} s, "
          f"peak concurrency {max_concurrency(events)}; wrote {out}")
    return EXIT_OK


def cmd_layout(args) -> int:
    spec = blockcyclic.GridSpec(args.mb, args.nb, args.P, args.Q)
    print(blockcyclic.render_map(spec, args.m, args.n))
    return EXIT_OK


def cmd_mkmat(args) -> int:
    A = make_test_matrix(args.kind, args.m, args.n, args.seed)
    write_matrix(args.out, A)
    print(f"wrote {args.kind} {args.m}x{args.n} to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randutv", description="randUTV factorization toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, algo=True):
        if algo:
            sp.add_argument("--algo", choices=["blocked", "ab"], default="blocked")
        sp.add_argument("--b", type=int, default=None, help="block size (default 128 blocked, 256 ab)")
        sp.add_argument("--q", type=int, default=1, help="power iterations")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker threads for ab (default $RANDUTV_WORKERS or core count)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--no-uv", action="store_true", help="skip building U and V")

    f = sub.add_parser("factorize", help="factorize a matrix file (RUTV or .csv)")
    f.add_argument("input")
    common(f)
    f.add_argument("--out", help="output prefix (default: input name without extension)")
    f.add_argument("--csv", help="write a quality report CSV")
    f.add_argument("--trace", help="write a task trace (ab only)")
    f.set_defaults(fn=cmd_factorize)

    bn = sub.add_parser("bench", help="timing sweep, one CSV row per run")
    bn.add_argument("--algo", choices=["blocked", "ab", "both"], default="blocked")
    bn.add_argument("--sizes", type=_int_list, default=[256, 512])
    bn.add_argument("--b", dest="b_list", type=_int_list, default=None)
    bn.add_argument("--q", dest="q_list", type=_int_list, default=[1])
    bn.add_argument("--workers", dest="workers_list", type=_int_list, default=None)
    bn.add_argument("--repeats", type=int, default=3)
    bn.add_argument("--seed", type=int, default=0)
    bn.add_argument("--no-uv", action="store_true")
    bn.add_argument("--csv", help="output CSV (default stdout)")
    bn.set_defaults(fn=cmd_bench, workers=None)

    v = sub.add_parser("verify", help="run the invariant checks")
    v.add_argument("level", nargs="?", choices=["fast", "full"], default="fast")
    v.set_defaults(fn=cmd_verify)

    t = sub.add_parser("trace", help="run the algorithm-by-blocks with tracing")
    t.add_argument("--n", type=int, default=1024)
    common(t, algo=False)
    t.add_argument("--out", help="trace CSV path (default trace.csv)")
    t.set_defaults(fn=cmd_trace)

    lay = sub.add_parser("layout", help="ASCII block-cyclic ownership map")
    lay.add_argument("--m", type=int, default=16)
    lay.add_argument("--n", type=int, default=24)
    lay.add_argument("--mb", type=int, default=4)
    lay.add_argument("--nb", type=int, default=4)
    lay.add_argument("--P", type=int, default=2)
    lay.add_argument("--Q", type=int, default=3)
    lay.set_defaults(fn=cmd_layout)

    mk = sub.add_parser("mkmat", help="write a test matrix")
    mk.add_argument("kind", help="gaussian | identity | geometric(beta) | rank_r(r)")
    mk.add_argument("--m", type=int, required=True)
    mk.add_argument("--n", type=int, default=None)
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--out", required=True)
    mk.set_defaults(fn=cmd_mkmat)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "n", 0) is None:
        args.n = args.m
    try:
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise UsageError("--workers must be >= 1")
        return args.fn(args)
    except (UsageError, RandUTVError, OSError, ValueError) as exc:
        print(f"randutv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
