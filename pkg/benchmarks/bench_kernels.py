"""Time the numba kernels against their plain-numpy twins.

    python benchmarks/bench_kernels.py [--repeat N]

The grid scan and the encoder have separate numba and numpy functions, so
both are timed in this process.  The Lagrangian solver is a single source
whose backend is picked at import time, so its numpy timing comes from a
child process started with CDORATE_NUMBA=0.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from cdorate import kernels
from cdorate.cdo_model import coin_ensemble
from cdorate.distortion import DistortionMeasure
from cdorate.rd_solver import _Problem

SOLVE_SNIPPET = """
import time
from cdorate.cdo_model import coin_ensemble
from cdorate.distortion import DistortionMeasure
from cdorate.rd_solver import solve_curve
s = coin_ensemble(0.5, 0.1, 0.9, "hidden")
solve_curve(s, DistortionMeasure.bw(), [0.05])  # warm-up (and compile when jitted)
t = time.perf_counter()
for m in (DistortionMeasure.bw(), DistortionMeasure.id()):
    solve_curve(s, m, [0.0, 0.02, 0.05, 0.1])
print(time.perf_counter() - t)
"""


def best_of(fn, repeat):
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def solve_seconds(flag):
    env = dict(os.environ, CDORATE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET], env=env, check=True,
                         capture_output=True, text=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        sys.exit("numba is not importable; nothing to compare")

    prob = _Problem(coin_ensemble(0.5, 0.1, 0.9, "hidden"), DistortionMeasure.bw())
    grid_args = (prob.kind, prob.pv, prob.pxv, prob.pxz, prob.w, prob.letter, 0.05, 501)

    rng = np.random.default_rng(1)
    words = rng.integers(0, 2, size=(20000, 64))
    v = rng.integers(0, 2, size=64)
    target = np.full((2, 2), 0.25)

    rows = [
        ("grid scan, 501^2 channels", lambda: kernels.scan_grid_numba(*grid_args),
         lambda: kernels.scan_grid_numpy(*grid_args)),
        ("encode, 20000 words x 64", lambda: kernels.encode_numba(v, words, target),
         lambda: kernels.encode_numpy(v, words, target)),
    ]
    print(f"{'kernel':34s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, fast, slow in rows:
        a, b = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{name:34s} {a:10.4f} {b:10.4f} {b / a:8.1f}")
    a, b = solve_seconds("1"), solve_seconds("0")
    print(f"{'8 rate-distortion points':34s} {a:10.4f} {b:10.4f} {b / a:8.1f}")


if __name__ == "__main__":
    main()
