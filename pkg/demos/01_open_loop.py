"""The AVR loop without a controller: poles, step response and its metrics.

The four first-order blocks close through the sensor, giving a fourth-order
loop with a lightly damped pair near -0.52 +- 4.66j.  Without integral
action the terminal voltage settles about 9% short of the reference.
"""
from avrpid import AvrParams, avr_closed_loop, pole_zero_report, transient_metrics
from avrpid.sim import SimGrid, tf_step_response

p = AvrParams()
tf = avr_closed_loop(p)
print("denominator (ascending):", tf.den.coeffs)

rep = pole_zero_report(tf)
for pole, zeta in zip(rep.poles, rep.damping):
    print(f"  pole {pole:.4f}   damping {zeta:.3f}")
print("zero:", rep.zeros)

# 20 s is long enough for the slow oscillation to die inside the 0.5% tail test
r = tf_step_response(tf, SimGrid(1e-3, 20.0))
m = transient_metrics(r)
print(f"peak {m.peak_value:.4f} p.u. at {m.Tp:.3f} s, overshoot {m.Mp_pct:.2f}%")
print(f"rise {m.Tr:.4f} s, settling {m.Ts:.3f} s, steady-state error {m.Ess:.4f}")
