"""Time- and frequency-domain performance figures of AVR step responses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lintf import TransferFunction, poly_roots
from .sim import StepResponse


class UnsettledResponseError(ValueError):
    """The response is still moving at the end of the horizon."""


class NonPositiveFinalValueError(ValueError):
    pass


@dataclass(frozen=True)
class TransientMetrics:
    peak_value: float
    Mp_pct: float
    Tp: float
    Tr: Optional[float]
    Ts: float
    Ess: float
    final_value: float
    rise_definition: str = "10-90"

    def as_dict(self) -> dict:
        return {
            "peak_value": self.peak_value, "Mp_pct": self.Mp_pct, "Tp": self.Tp,
            "Tr": self.Tr, "Ts": self.Ts, "Ess": self.Ess,
            "final_value": self.final_value, "rise_definition": self.rise_definition,
        }


@dataclass(frozen=True)
class PoleZeroReport:
    poles: np.ndarray
    zeros: np.ndarray
    damping: np.ndarray

    @property
    def stable(self) -> bool:
        return bool(np.all(self.poles.real < 0))


@dataclass(frozen=True)
class FrequencyMetrics:
    peak_gain_db: float
    phase_margin_deg: float
    gain_crossover: Optional[float]
    delay_margin_s: float
    bandwidth: float


def _first_crossing(t, v, level) -> Optional[float]:
    """Linearly interpolated time at which ``v`` first reaches ``level`` from below."""
    above = v >= level
    if not above.any():
        return None
    k = int(np.argmax(above))
    if k == 0:
        return float(t[0])
    v0, v1 = v[k - 1], v[k]
    return float(t[k - 1] + (level - v0) / (v1 - v0) * (t[k] - t[k - 1]))


def settling_time(t, v, final, band=0.02) -> float:
    """Last time ``v`` leaves the band ``final * (1 +- band)``, interpolated."""
    tol = band * abs(final)
    dev = np.abs(v - final)
    outside = np.flatnonzero(dev > tol)
    if outside.size == 0:
        return float(t[0])
    k = int(outside[-1])
    if k == len(v) - 1:
        return float(t[k])
    d0, d1 = dev[k], dev[k + 1]
    return float(t[k] + (d0 - tol) / (d0 - d1) * (t[k + 1] - t[k]))


def transient_metrics(r: StepResponse, rise: str = "10-90", band: float = 0.02,
                      require_settled: bool = True) -> TransientMetrics:
    """Overshoot, peak/rise/settling times and steady-state error of a step response.

    The final value is the mean of the last 1% of samples; overshoot and the
    settling band are both relative to it.  ``rise`` selects ``"10-90"`` or
    ``"0-100"`` of the final value.
    """
    t, v = r.t, r.v
    n = len(v)
    final = float(np.mean(v[-max(1, n // 100):]))
    if final <= 0:
        raise NonPositiveFinalValueError(f"final value {final:.6g} is not positive")
    tail = v[-max(2, n // 20):]
    spread = float(tail.max() - tail.min()) / abs(final)
    if require_settled and spread >= 0.005:
        raise UnsettledResponseError(
            f"last 5% of samples vary by {100 * spread:.3g}% of the final value")
    k = int(np.argmax(v))
    peak = float(v[k])
    mp = max(0.0, 100.0 * (peak - final) / final)
    if rise == "10-90":
        t10 = _first_crossing(t, v, 0.1 * final)
        t90 = _first_crossing(t, v, 0.9 * final)
        tr = None if t10 is None or t90 is None else t90 - t10
    elif rise == "0-100":
        tr = _first_crossing(t, v, final)
    else:
        raise ValueError(f"unknown rise-time definition {rise!r}")
    return TransientMetrics(
        peak_value=peak, Mp_pct=mp, Tp=float(t[k]), Tr=tr,
        Ts=settling_time(t, v, final, band), Ess=abs(r.reference - final),
        final_value=final, rise_definition=rise,
    )


def damping_ratio(p: complex) -> float:
    mag = abs(p)
    if mag == 0:
        return 0.0
    return float(-p.real / mag)


def pole_zero_report(tf: TransferFunction) -> PoleZeroReport:
    poles = poly_roots(tf.den)
    zeros = poly_roots(tf.num) if tf.num.degree >= 1 else np.zeros(0, complex)
    poles = _snap_real(poles)
    zeros = _snap_real(zeros)
    damp = np.array([damping_ratio(p) for p in poles])
    return PoleZeroReport(poles, zeros, damp)


def _snap_real(r: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    r = r.copy()
    small = np.abs(r.imag) <= tol * np.maximum(1.0, np.abs(r))
    r[small] = r[small].real
    return r


def _bisect(f, lo, hi, rtol=1e-6, maxiter=200):
    """Root of ``f`` on ``[lo, hi]`` in log-frequency, to ``rtol`` relative width."""
    flo = f(lo)
    for _ in range(maxiter):
        if hi - lo <= rtol * hi:
            break
        mid = math.sqrt(lo * hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return math.sqrt(lo * hi)


def _crossings(tf: TransferFunction, w: np.ndarray, level: float):
    """Frequencies where ``|tf(jw)|`` crosses ``level``, with unwrapped phase (radians) there."""
    H = tf.freqresp(w)
    mag = np.abs(H)
    phase = np.unwrap(np.angle(H))
    g = np.log(mag) - math.log(level)
    idx = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)
    out = []
    f = lambda x: math.log(abs(tf(1j * x))) - math.log(level)  # noqa: E731
    for i in idx:
        wc = _bisect(f, w[i], w[i + 1])
        raw = float(np.angle(tf(1j * wc)))
        ref = phase[i]
        ph = ref + (raw - ref + math.pi) % (2 * math.pi) - math.pi
        out.append((wc, ph))
    return out


def stability_margins(tf: TransferFunction, w: np.ndarray) -> tuple[float, Optional[float], float]:
    """Phase margin (deg), its gain-crossover frequency and the delay margin.

    When the magnitude crosses 0 dB several times, the crossing with the
    smallest phase margin is reported.  A response that reaches unity gain
    only at DC reports 180 degrees at ``w = 0`` with an infinite delay margin;
    no crossing at all gives infinite margins.
    """
    best = None
    for wc, ph in _crossings(tf, w, 1.0):
        pm = (math.degrees(ph) + 180.0 + 180.0) % 360.0 - 180.0
        if best is None or pm < best[0]:
            best = (pm, wc)
    if best is None:
        if abs(abs(tf.dc_gain()) - 1.0) <= 1e-9 and np.all(np.abs(tf.freqresp(w)) < 1.0):
            # unity only at DC: crossover at w = 0 with zero phase
            return 180.0, 0.0, math.inf
        return math.inf, None, math.inf
    pm, wc = best
    return pm, wc, math.radians(pm) / wc


def frequency_metrics(loop: TransferFunction, closed: TransferFunction,
                      margin_source: str = "closed", n_points: int = 2000,
                      w_min: float = 1e-2, w_max: float = 1e3) -> FrequencyMetrics:
    """Bode figures: closed-loop resonance and bandwidth plus phase/delay margins.

    ``margin_source="closed"`` takes margins from the closed-loop response,
    the convention of AVR-PID comparison studies;
    ``"loop"`` gives the classical open-loop margins.
    """
    if margin_source not in ("closed", "loop"):
        raise ValueError(f"margin_source must be 'closed' or 'loop', got {margin_source!r}")
    w = np.logspace(math.log10(w_min), math.log10(w_max), n_points)
    dc = abs(closed.dc_gain())
    mag = np.abs(closed.freqresp(w))
    peak_db = 20 * math.log10(max(float(mag.max()), dc)) if max(float(mag.max()), dc) > 0 else -math.inf
    pm, wc, dm = stability_margins(closed if margin_source == "closed" else loop, w)

    bw = math.inf
    if dc > 0 and math.isfinite(dc):
        level = dc * 10 ** (-3 / 20)
        below = np.flatnonzero(mag < level)
        if below.size:
            i = int(below[0])
            if i == 0:
                bw = float(w[0])
            else:
                f = lambda x: abs(closed(1j * x)) - level  # noqa: E731
                bw = _bisect(f, w[i - 1], w[i])
    return FrequencyMetrics(peak_gain_db=peak_db, phase_margin_deg=pm, gain_crossover=wc,
                            delay_margin_s=dm, bandwidth=bw)


def bode_table(tf: TransferFunction, w: np.ndarray) -> np.ndarray:
    """Columns ``omega, magnitude_db, phase_deg`` (phase unwrapped)."""
    H = tf.freqresp(w)
    return np.column_stack([w, 20 * np.log10(np.abs(H)), np.degrees(np.unwrap(np.angle(H)))])
