"""Time the compiled (numba) and pure-numpy backends on the hot paths.

    python benchmarks/bench_backends.py [--repeat 5]
"""
import argparse
import math
import timeit

import numpy as np

from edpa import _accel
from edpa.process_core import equidistant
from edpa.sde_simulator import ModelParams, SimConfig, pair_drift, run_ensemble
from edpa.special_functions import theta1_logderiv_real


def cases():
    v = np.linspace(0.001, 0.999, 100_000)
    rng = np.random.default_rng(0)
    X = np.sort(rng.uniform(0, 2 * math.pi, (2048, 5)), axis=1)
    params = ModelParams(5, 1.0, 4.0)
    cfg = SimConfig(dt=1e-3, paths=500, seed=1)
    init = equidistant(3, 1.0)
    return {
        "theta1_logderiv_real, 1e5 points": lambda: theta1_logderiv_real(v, 0.3),
        "elliptic pair drift, 2048 x 5": lambda: pair_drift("elliptic", X, 1.0, params),
        "elliptic ensemble, 500 paths x 200 steps": lambda: run_ensemble(
            "elliptic", init, cfg, ModelParams(3, 1.0, 4.0), 0.2, workers=1),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not _accel.HAS_NUMBA:
        print("numba not importable; only the numpy backend is available")
    print(f"{'case':44s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, func in cases().items():
        best = {}
        for backend in ("numba", "numpy"):
            previous = _accel.set_backend(backend)
            try:
                func()  # compile / warm up
                best[backend] = min(timeit.repeat(func, number=1, repeat=args.repeat))
            finally:
                _accel.set_backend(previous)
        print(f"{name:44s} {best['numba']:10.4f} {best['numpy']:10.4f} {best['numpy'] / best['numba']:8.1f}x")


if __name__ == "__main__":
    main()
