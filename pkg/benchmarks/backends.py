"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter (the backend is fixed at import
time by RANDUTV_DISABLE_NUMBA), timing the hot kernels and one full
factorization. Usage: python3 benchmarks/backends.py [--n 256] [--repeats 3]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from randutv import BACKEND
from randutv.blocked import UTVConfig, randutv
from randutv.householder import hqr
from randutv.matrix import gemm, zeros
from randutv.metrics import make_test_matrix
from randutv.svd import svd_block

n, b, repeats = map(int, sys.argv[1:4])
A = make_test_matrix("gaussian", n, n, 1)
Bk = make_test_matrix("gaussian", b, b, 2)


def best(fn):
    fn()  # warm-up (JIT compilation)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


out = {
    "backend": BACKEND,
    f"gemm {n}^3": best(lambda: gemm(1.0, False, A, False, A, 0.0, zeros(n, n))),
    f"hqr {n}x{n}": best(lambda: hqr(np.array(A, order="F"))),
    f"svd_block {b}x{b}": best(lambda: svd_block(Bk)),
    f"randutv n={n} b={b} q=1": best(lambda: randutv(A, UTVConfig(b=b, q=1))),
}
print(json.dumps(out))
"""


def run(backend_off: bool, n: int, b: int, repeats: int) -> dict:
    env = dict(os.environ, RANDUTV_DISABLE_NUMBA="1" if backend_off else "0")
    proc = subprocess.run([sys.executable, "-c", WORKER, str(n), str(b), str(repeats)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--b", type=int, default=32)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.n, args.b, args.repeats)
    slow = run(True, args.n, args.b, args.repeats)
    print(f"{'kernel':<28}{fast['backend']:>12}{slow['backend']:>12}{'ratio':>9}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:<28}{fast[key]:>11.4f}s{slow[key]:>11.4f}s{slow[key] / fast[key]:>8.1f}x")


if __name__ == "__main__":
    main()
