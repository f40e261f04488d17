#!/usr/bin/env python3
"""Benchmark the compiled plant kernel against the pure-Python fallback.

Times how long each backend takes to integrate the truth plant over a
30-second run at 500 Hz with 10 microsecond RK4 substeps (the workload one
scenario run puts on the kernel) and reports the speedup, after asserting
both backends produce the same trajectory.
"""

import math
import time

from mapsched import _plant_py

try:
    from mapsched import _plant_cy
except ImportError:
    _plant_cy = None

PARAMS = dict(
    kt=0.042, ke=0.042, jeq=2.06e-5, lm=1.16e-3, rm=8.4,
    tau_s=0.003, tau_c=0.002, b=2.46e-6, omega_rest=1e-6, tau_ext=0.0,
)
TICKS = 15_000
DT = 0.002
SUBSTEPS = 200


def run(kernel):
    state = (0.0, 0.0, 0.0)
    t0 = time.perf_counter()
    for k in range(TICKS):
        u = 2.0 * math.sin(2.0 * math.pi * 0.5 * k * DT)
        state = kernel.motor_rk4(*state, u, DT, SUBSTEPS, *PARAMS.values())
    return time.perf_counter() - t0, state


def main():
    print(f"workload: {TICKS} ticks x {SUBSTEPS} RK4 substeps "
          f"({TICKS * SUBSTEPS:,} inner steps)")
    t_py, s_py = run(_plant_py)
    print(f"pure python : {t_py:8.3f} s")
    if _plant_cy is None:
        print("compiled kernel not built; install with a C compiler to compare")
        return
    t_cy, s_cy = run(_plant_cy)
    print(f"compiled    : {t_cy:8.3f} s")
    assert s_py == s_cy, f"backend trajectories diverged: {s_py} vs {s_cy}"
    print(f"speedup     : {t_py / t_cy:8.1f}x  (trajectories bitwise identical)")


if __name__ == "__main__":
    main()
