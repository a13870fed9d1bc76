"""Objective functions for PID gain tuning of the AVR loop.

Integral indices (IAE, ITAE, ISE, ITSE, RMSE) use trapezoidal quadrature on
the simulation grid.  The transient-based criteria (ZLG, the combined J and
the weighted OF1-OF4 forms) take overshoot as a fraction of the final value.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lintf import AvrParams, PidGains, avr_pid_closed_loop, poly_roots, tf_to_state_space
from .metrics import TransientMetrics, transient_metrics
from .sim import SimGrid, SimulationOverflowError, StepResponse, step_response

PENALTY = 1e6

INTEGRAL_KINDS = ("IAE", "ITAE", "ISE", "ITSE", "RMSE")
WEIGHTED_INDEX = {"OF1": "ITAE", "OF2": "IAE", "OF3": "ITSE", "OF4": "ISE"}
KINDS = INTEGRAL_KINDS + ("ZLG", "J_COMBINED") + tuple(WEIGHTED_INDEX)


def _trapz(y: np.ndarray, t: np.ndarray) -> float:
    return float(np.trapezoid(y, t)) if hasattr(np, "trapezoid") else float(np.trapz(y, t))


def integral_index(kind: str, r: StepResponse, literal_rmse: bool = False) -> float:
    """Integral of the tracking error ``e = reference - v`` over the whole grid.

    ``literal_rmse`` swaps the root-mean-square form for ``(1/T) * int |e| dt``.
    """
    t = r.t
    e = r.error
    kind = kind.upper()
    if kind == "IAE":
        return _trapz(np.abs(e), t)
    if kind == "ITAE":
        return _trapz(t * np.abs(e), t)
    if kind == "ISE":
        return _trapz(e * e, t)
    if kind == "ITSE":
        return _trapz(t * e * e, t)
    if kind == "RMSE":
        T = float(t[-1])
        if literal_rmse:
            return _trapz(np.abs(e), t) / T
        return math.sqrt(_trapz(e * e, t) / T)
    raise ValueError(f"not an integral index: {kind!r}")


def zlg(m: TransientMetrics, beta: float = 1.0, literal: bool = False) -> float:
    """ZLG criterion ``(1 - exp(-beta)) (Mp + Ess) + exp(-beta) (Ts - Tr)``.

    ``literal=True`` uses ``1 - exp(beta)`` in the first weight instead.
    """
    if m.Tr is None:
        raise ValueError("rise time undefined")
    w1 = 1 - math.exp(beta) if literal else -math.expm1(-beta)
    return w1 * (m.Mp_pct / 100.0 + m.Ess) + math.exp(-beta) * (m.Ts - m.Tr)


def combined_j(itse: float, zlg_value: float, mu: float = 50.0) -> float:
    if not 30 <= mu <= 70:
        warnings.warn(f"mu={mu} outside the usual 30-70 range", stacklevel=2)
    return mu * itse + zlg_value


def weighted_of(kind: str, index_value: float, Ts: float, Mp: float,
                W1: float = 1.0, W2: float = 0.1, W3: float = 1.0) -> float:
    """``W1 * index + W2 * Ts + W3 * Mp``; ``kind`` only documents which index was passed."""
    if kind.upper() not in WEIGHTED_INDEX:
        raise ValueError(f"unknown weighted objective {kind!r}")
    return W1 * index_value + W2 * Ts + W3 * Mp


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str = "ITSE"
    beta: float = 1.0
    mu: float = 50.0
    W1: float = 1.0
    W2: float = 0.1
    W3: float = 1.0
    grid: SimGrid = field(default_factory=SimGrid)
    literal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.upper())
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective {self.kind!r}; choose from {KINDS}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        w = (self.W1, self.W2, self.W3)
        if self.kind in WEIGHTED_INDEX and (min(w) < 0 or not any(w)):
            raise ValueError("weights must be non-negative and not all zero")


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    penalized: bool = False
    metrics: Optional[TransientMetrics] = None


def evaluate_gains(p: AvrParams, g: PidGains, spec: ObjectiveSpec) -> ObjectiveValue:
    """Objective of the closed AVR-PID loop; unstable or failed runs get a penalty >= 1e6."""
    tf = avr_pid_closed_loop(p, g)
    poles = poly_roots(tf.den)
    if np.any(poles.real >= 0):
        return ObjectiveValue(PENALTY + float(np.sum(np.maximum(0.0, poles.real))), True)
    try:
        r = step_response(tf_to_state_space(tf), spec.grid)
    except SimulationOverflowError:
        return ObjectiveValue(PENALTY, True)

    kind = spec.kind
    if kind in INTEGRAL_KINDS:
        m = _metrics_or_none(r)
        return ObjectiveValue(integral_index(kind, r, literal_rmse=spec.literal), False, m)
    try:
        m = transient_metrics(r)
    except ValueError:
        return ObjectiveValue(PENALTY, True)
    if m.Tr is None:
        return ObjectiveValue(PENALTY, True, m)
    if kind == "ZLG":
        val = zlg(m, spec.beta, spec.literal)
    elif kind == "J_COMBINED":
        val = combined_j(integral_index("ITSE", r), zlg(m, spec.beta, spec.literal), spec.mu)
    else:
        idx = integral_index(WEIGHTED_INDEX[kind], r)
        val = weighted_of(kind, idx, m.Ts, m.Mp_pct / 100.0, spec.W1, spec.W2, spec.W3)
    return ObjectiveValue(float(val), False, m)


def _metrics_or_none(r: StepResponse) -> Optional[TransientMetrics]:
    try:
        return transient_metrics(r, require_settled=False)
    except ValueError:
        return None


def objective_closure(p: AvrParams, spec: ObjectiveSpec):
    """Callable ``x -> float`` over ``[K_p, K_i, K_d]`` for the optimizers."""
    def f(x) -> float:
        return evaluate_gains(p, PidGains.from_array(x), spec).value
    return f
