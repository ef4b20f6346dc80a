"""Time the compiled and pure-Python grid kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Also times one full case-1 simulation with each backend.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from bimrobo import _kernels


def _astar_inputs(n: int, density: float, seed: int):
    rng = np.random.default_rng(seed)
    blocked = (rng.random((n, n)) < density).astype(np.uint8)
    blocked[0, 0] = blocked[n - 1, n - 1] = 0
    return blocked, 0, 0, n - 1, n - 1


def _fill_inputs():
    cells = np.zeros((400, 400), dtype=np.int8)
    t = np.linspace(0, 2 * np.pi, 9)[:-1]
    poly = np.ascontiguousarray(np.column_stack([10 + 8 * np.cos(t), 10 + 8 * np.sin(t)]))
    return cells, poly, 0.0, 0.0, 0.05, 100


def _time(fn, args, repeat: int) -> float:
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def _sim_seconds(pure: bool) -> float:
    env = dict(os.environ)
    env.pop("BIMROBO_PURE_PYTHON", None)
    if pure:
        env["BIMROBO_PURE_PYTHON"] = "1"
    code = ("import time, tempfile; from bimrobo.cli import main; t = time.perf_counter(); "
            "d = tempfile.mkdtemp(); main(['simulate', '--scenario', 'case1', '--out', d]); "
            "print(time.perf_counter() - t)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-sim", action="store_true", help="only time the kernels")
    args = ap.parse_args()
    if _kernels.compiled is None:
        sys.exit("compiled extension not available; build it with "
                 "`pip install -e . --no-build-isolation`")
    cases = [(f"astar {n}x{n} @{d:.0%}", "astar", _astar_inputs(n, d, n))
             for n, d in ((50, 0.2), (200, 0.2), (400, 0.1))]
    cases.append(("fill_convex octagon 400x400", "fill_convex", _fill_inputs()))
    print(f"{'kernel':32} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for label, name, inp in cases:
        tp = _time(getattr(_kernels.python, name), inp, args.repeat)
        tc = _time(getattr(_kernels.compiled, name), inp, args.repeat)
        print(f"{label:32} {tp * 1e3:12.2f} {tc * 1e3:12.2f} {tp / tc:8.1f}x")
    if not args.skip_sim:
        tp, tc = _sim_seconds(True), _sim_seconds(False)
        print(f"{'case1 simulate (end to end)':32} {tp * 1e3:12.0f} {tc * 1e3:12.0f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
