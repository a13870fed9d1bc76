"""Tune the PID gains for minimum ITSE and compare against Ziegler-Nichols.

PSO, DE and GOA search the box [0.01, 2]^3 with the same budget and seed.
The ultimate-cycle rule gives a quick baseline with much more overshoot.
"""
import time

from avrpid import AvrParams, bench, objectives, tuners

p = AvrParams()
itse = objectives.objective_closure(p, objectives.ObjectiveSpec("ITSE"))

zn = tuners.ziegler_nichols(p)
m = bench.closed_loop_metrics(p, zn)
print(f"ZN   gains {zn.as_array().round(4)}  ITSE {itse(zn.as_array()):.5f}  "
      f"overshoot {m.Mp_pct:.1f}%  Ts {m.Ts:.2f} s")

for algo in ("PSO", "DE", "GOA"):
    t0 = time.perf_counter()
    cfg = tuners.OptimizerConfig(algo, population=30, iterations=60, seed=1,
                                 workers=bench.default_workers())
    res = tuners.optimize(itse, tuners.Bounds(), cfg)
    m = bench.closed_loop_metrics(p, res.best_gains)
    print(f"{algo:<4} gains {res.best_position.round(4)}  ITSE {res.best_value:.5f}  "
          f"overshoot {m.Mp_pct:.1f}%  Ts {m.Ts:.2f} s  ({time.perf_counter() - t0:.1f} s)")
