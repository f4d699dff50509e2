"""Throughput of the batched stress update: numba kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_return_map.py [--points 20000] [--repeat 5]

Both paths receive identical random plastic-loading inputs; the script also
reports the largest difference between their outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from chemoplast import _accel
from chemoplast.constitutive import DegradationModel, MaterialParams, PointStates, update_points


def make_inputs(n: int, mat: MaterialParams, seed: int = 0):
    rng = np.random.default_rng(seed)
    states = PointStates.virgin(n)
    scale = 4.0 * mat.kappa0
    deps = rng.normal(scale=scale, size=(n, 3))
    c = rng.uniform(0.0, 1.0, n)
    return states, deps, c


def time_path(numba: bool, model, mat, states, deps, c, repeat: int) -> tuple[float, tuple]:
    _accel.use_numba(numba)
    out = update_points(states, deps, c, model, mat)  # warm-up (and JIT compile)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = update_points(states, deps, c, model, mat)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    mat = MaterialParams()
    initial = _accel.numba_enabled()
    print(f"{'model':<8}{'numpy [s]':>12}{'numba [s]':>12}{'speed-up':>10}{'max |diff|':>14}")
    try:
        for model in (DegradationModel.MODEL_I, DegradationModel.MODEL_II):
            states, deps, c = make_inputs(args.points, mat)
            t_np, out_np = time_path(False, model, mat, states, deps, c, args.repeat)
            if not _accel.HAVE_NUMBA:
                print(f"{model.value:<8}{t_np:12.4f}{'n/a':>12}")
                continue
            t_nb, out_nb = time_path(True, model, mat, states, deps, c, args.repeat)
            diff = max(float(np.max(np.abs(out_np[0].stress - out_nb[0].stress))) / mat.sigma0,
                       float(np.max(np.abs(out_np[2] - out_nb[2]))) / mat.mu0)
            print(f"{model.value:<8}{t_np:12.4f}{t_nb:12.4f}{t_np / t_nb:10.1f}{diff:14.2e}")
    finally:
        _accel.use_numba(initial)


if __name__ == "__main__":
    main()
