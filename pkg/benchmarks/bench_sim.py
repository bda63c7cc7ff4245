"""Compare the numba-compiled simulation kernels against the numpy fallback.

Run twice to see both paths:

    python benchmarks/bench_sim.py
    STOCHDISS_DISABLE_NUMBA=1 python benchmarks/bench_sim.py

or let this script spawn the fallback itself with --both.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def bench(runs: int, T: int, repeats: int) -> None:
    from stochdiss import DelayDistribution, PlantModel
    from stochdiss import _kernels

    plant = PlantModel(A=[[0.6024, -0.0038], [0.0381, 0.9451]],
                       B=[[0.1647], [0.0960]], C=[[0.0, 1.0]], D=[[0.0]])
    dist = DelayDistribution.from_mapping(
        {1: 0.75, 2: 0.1, 3: 0.05, 4: 0.05, 5: 0.05})
    rng = np.random.default_rng(0)
    u = rng.standard_normal((T + 1, 1))
    W = rng.choice(dist.support, size=(runs, T + 1), p=dist.pmf).astype(np.int64)
    Q, S, R = -np.eye(1), np.zeros((1, 1)), 4.0 * np.eye(1)

    # warm-up (includes jit compilation when numba is active)
    _kernels.mc_running_supply(plant.A, plant.B, plant.C, plant.D, Q, S, R, u, W)
    _kernels.sim_recursion(plant.A, plant.B, plant.C, plant.D, u, W[0], np.zeros(2))

    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = _kernels.mc_running_supply(plant.A, plant.B, plant.C, plant.D,
                                         Q, S, R, u, W)
        best = min(best, time.perf_counter() - t0)
    steps = runs * (T + 1)
    print(f"backend={_kernels.backend_name():<6} batched supply  "
          f"runs={runs} T={T}: best {best * 1e3:8.2f} ms  "
          f"({steps / best / 1e6:6.1f} M steps/s)  checksum {out.sum():.6f}",
          flush=True)

    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for r in range(min(runs, 200)):
            _kernels.sim_recursion(plant.A, plant.B, plant.C, plant.D,
                                   u, W[r], np.zeros(2))
        best = min(best, time.perf_counter() - t0)
    n_single = min(runs, 200)
    print(f"backend={_kernels.backend_name():<6} single traject. "
          f"x{n_single} T={T}: best {best * 1e3:8.2f} ms  "
          f"({n_single * (T + 1) / best / 1e6:6.1f} M steps/s)", flush=True)


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--runs", type=int, default=2000)
    parser.add_argument("--horizon", type=int, default=500)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--both", action="store_true",
                        help="also run the numpy fallback in a subprocess")
    args = parser.parse_args()
    bench(args.runs, args.horizon, args.repeats)
    if args.both and os.environ.get("STOCHDISS_DISABLE_NUMBA", "") in ("", "0"):
        env = dict(os.environ, STOCHDISS_DISABLE_NUMBA="1")
        subprocess.run([sys.executable, __file__, "--runs", str(args.runs),
                        "--horizon", str(args.horizon),
                        "--repeats", str(args.repeats)], env=env, check=True)


if __name__ == "__main__":
    main()
