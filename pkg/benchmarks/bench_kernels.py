"""Compare the compiled kernels with the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--scenario]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from drivestack._core import _fallback

try:
    from drivestack._core import _kernels
except ImportError:
    _kernels = None


def projection_case(rng, n_way=600, n_pts=500):
    x = np.linspace(0.0, 600.0, n_way)
    y = 8.0 * np.sin(x / 60.0)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])
    px = rng.uniform(0, 600, n_pts)
    py = rng.uniform(-10, 10, n_pts)
    return px, py, x, y, s


def collision_case(rng, n_traj=400, n_pts=51, n_obs=14):
    x = np.cumsum(rng.uniform(1.0, 2.0, (n_traj, n_pts)), axis=1)
    y = rng.uniform(-3, 3, (n_traj, n_pts))
    psi = rng.uniform(-0.2, 0.2, (n_traj, n_pts))
    t = np.arange(n_pts) * 0.1
    fp_off = np.array([-0.5, 1.45, 3.4])
    fp_r = np.full(3, 1.1)
    obs = [rng.uniform(0, 100, n_obs), rng.uniform(-4, 4, n_obs), np.zeros(n_obs), np.zeros(n_obs),
           np.full(n_obs, 0.2)]
    return (x, y, psi, t, fp_off, fp_r, *obs, 0.8)


def bench(label, fn, args, repeat):
    best = min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))
    return label, best


def scenario_wall(pure: bool) -> float:
    env = dict(os.environ, DRIVESTACK_PURE_PYTHON="1" if pure else "0")
    code = (
        "import time;from drivestack.scenario import bundled_scenario,load_scenario,run;"
        "s=load_scenario(bundled_scenario('cza_basic'));t=time.perf_counter();run(s);"
        "print(time.perf_counter()-t)"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--scenario", action="store_true", help="also time a full cza_basic run per backend")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = [("project_points", projection_case(rng)), ("collide_batch", collision_case(rng))]
    print(f"{'kernel':<16}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, case in cases:
        _, t_py = bench(name, getattr(_fallback, name), case, args.repeat)
        if _kernels is None:
            print(f"{name:<16}{t_py * 1e3:14.3f}{'n/a':>14}{'':>10}")
            continue
        _, t_cy = bench(name, getattr(_kernels, name), case, args.repeat)
        print(f"{name:<16}{t_py * 1e3:14.3f}{t_cy * 1e3:14.3f}{t_py / t_cy:9.1f}x")

    if args.scenario:
        py = scenario_wall(True)
        line = f"{'cza_basic run':<16}{py * 1e3:14.1f}"
        if _kernels is not None:
            cy = scenario_wall(False)
            line += f"{cy * 1e3:14.1f}{py / cy:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
