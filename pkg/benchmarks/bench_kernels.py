"""Compiled vs numpy sweep kernels.

Times ``affine_sweep`` (the trapezoidal Volterra recurrence) and
``product_sweep`` (the time-ordered product) on grids of increasing length,
then one end-to-end Picard solve under each backend.

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 256,1024,4096]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from condtime import _sweep_py

try:
    from condtime import _sweep
except ImportError:
    _sweep = None

END_TO_END = """
import time
from condtime._kernels import BACKEND
from condtime.presets import load_preset
from condtime.runner import build_scenario, uniform_state
from condtime import evolution as ev
sc = build_scenario(load_preset("P3").refined({factor}))
sc.kernel
t = time.perf_counter()
for _ in range({repeat}):
    ev.picard_solve(sc.H_S, sc.kernel, uniform_state(sc.n), 0, sc.clock)
print(BACKEND, (time.perf_counter() - t) / {repeat})
"""


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--sizes", default="256,1024,4096,16384")
    p.add_argument("--n", type=int, default=2, help="system dimension")
    args = p.parse_args(argv)
    if _sweep is None:
        print("compiled extension not built; only the numpy backend is available", file=sys.stderr)
    rng = np.random.default_rng(0)
    n = args.n
    print(f"{'kernel':14s} {'m':>7s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speedup':>8s}")
    for m in (int(s) for s in args.sizes.split(",")):
        M = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))[0]
        c = rng.standard_normal((m, n, n)) + 1j * rng.standard_normal((m, n, n))
        S = np.broadcast_to(M, (m, n, n)).copy()
        x0 = np.eye(n, dtype=complex)
        for name, py, cy in (
            ("affine_sweep", lambda: _sweep_py.affine_sweep(M, c, x0), _sweep and (lambda: _sweep.affine_sweep(M, c, x0))),
            ("product_sweep", lambda: _sweep_py.product_sweep(S, x0), _sweep and (lambda: _sweep.product_sweep(S, x0))),
        ):
            t_py = bench(py, args.repeat)
            if cy:
                t_cy = bench(cy, args.repeat)
                print(f"{name:14s} {m:7d} {1e3 * t_py:11.3f} {1e3 * t_cy:12.3f} {t_py / t_cy:8.1f}")
            else:
                print(f"{name:14s} {m:7d} {1e3 * t_py:11.3f} {'-':>12s} {'-':>8s}")
    print("\nend-to-end Picard solve, P3 refined x8 (d = 256)")
    for pure in ("1", "0"):
        env = dict(os.environ, CONDTIME_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", END_TO_END.format(factor=8, repeat=args.repeat)],
                             env=env, capture_output=True, text=True, check=True)
        backend, sec = out.stdout.split()
        print(f"  {backend:7s} {1e3 * float(sec):9.2f} ms")


if __name__ == "__main__":
    main()
