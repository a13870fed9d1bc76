"""Load steps at the generator input, then a time-constant sweep.

Two +0.1 p.u. disturbances hit at 3 s and 5 s; integral action pulls the
voltage back to 1.0 each time.  The sweep scales one time constant at a
time by -50% to +50% and reports how the step response moves.
"""
import numpy as np

from avrpid import AvrParams, PidGains, bench
from avrpid.sim import DisturbanceEvent, SimGrid, scenario_response

p = AvrParams()
g = PidGains(1.1281, 0.9567, 0.5671)

r = scenario_response(p, g, [DisturbanceEvent(3.0, 0.1), DisturbanceEvent(5.0, 0.1)], SimGrid(1e-3, 8.0))
for t0, t1 in ((3.0, 5.0), (5.0, 8.0)):
    k0, k1 = r.grid.index_of(t0), r.grid.index_of(t1)
    seg = r.v[k0:k1]
    print(f"{t0:.0f}-{t1:.0f} s: worst deviation {np.abs(seg - 1).max():.4f} p.u., "
          f"voltage at end {seg[-1]:.5f}")

print()
for row in bench.robustness_sweep(p, g):
    m = row.metrics
    print(f"{row.parameter:>7} {row.level:+.0%}:  Mp {m.Mp_pct:5.2f}%  Tr {m.Tr:.3f} s  Ts {m.Ts:.3f} s")
