"""Box-bounded metaheuristics (PSO, DE, GOA) and the Ziegler-Nichols baseline.

All optimizers draw every random number from one generator seeded by
``OptimizerConfig.seed`` before a population is evaluated, so results do not
depend on how (or in which order) the objective evaluations are scheduled.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lintf import AvrParams, PidGains, TransferFunction, loop_tf

NONFINITE_PENALTY = 1e9


class NotTunableError(ValueError):
    """The loop never reaches -180 degrees of phase, so there is no ultimate gain."""


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray = field(default_factory=lambda: np.full(3, 0.01))
    upper: np.ndarray = field(default_factory=lambda: np.full(3, 2.0))

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper bounds must be 1-D arrays of equal length")
        if np.any(lo >= hi):
            raise ValueError("each lower bound must be below its upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def box(cls, lo: float, hi: float, dim: int = 3) -> Bounds:
        return cls(np.full(dim, lo), np.full(dim, hi))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def clip(self, X: np.ndarray) -> np.ndarray:
        return np.clip(X, self.lower, self.upper)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lower + rng.random((n, self.dim)) * self.width


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: str = "PSO"
    population: int = 50
    iterations: int = 100
    seed: int = 0
    workers: int = 1
    # PSO
    w_start: float = 0.9
    w_end: float = 0.4
    c1: float = 2.0
    c2: float = 2.0
    vmax_frac: float = 0.2
    # DE/rand/1/bin
    F: float = 0.5
    CR: float = 0.9
    # GOA
    c_max: float = 1.0
    c_min: float = 1e-5
    attraction: float = 0.5
    length_scale: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "algorithm", self.algorithm.upper())
        if self.algorithm not in ("PSO", "DE", "GOA"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.algorithm == "DE" and self.population < 4:
            raise ValueError("DE/rand/1 needs a population of at least 4")


@dataclass
class OptimizerResult:
    best_position: np.ndarray
    best_value: float
    history: list[float]
    evaluations: int
    algorithm: str = ""

    @property
    def best_gains(self) -> PidGains:
        return PidGains.from_array(self.best_position)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OptimizerResult):
            return NotImplemented
        return (np.array_equal(self.best_position, other.best_position)
                and self.best_value == other.best_value
                and self.history == other.history
                and self.evaluations == other.evaluations
                and self.algorithm == other.algorithm)


class _Tracker:
    """Evaluates populations and keeps the best-so-far (earliest wins ties)."""

    def __init__(self, objective: Callable, workers: int):
        self.objective = objective
        self.workers = workers
        self.best_x: Optional[np.ndarray] = None
        self.best_f = math.inf
        self.history: list[float] = []
        self.evaluations = 0

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        rows = [x.copy() for x in X]
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as ex:
                vals = list(ex.map(self.objective, rows))
        else:
            vals = [self.objective(x) for x in rows]
        f = np.array([float(v) if np.isfinite(v) else NONFINITE_PENALTY for v in vals])
        self.evaluations += len(f)
        i = int(np.argmin(f))
        if f[i] < self.best_f:
            self.best_f = float(f[i])
            self.best_x = X[i].copy()
        return f

    def close_iteration(self):
        self.history.append(self.best_f)

    def result(self, algorithm: str) -> OptimizerResult:
        return OptimizerResult(self.best_x, self.best_f, self.history, self.evaluations, algorithm)


def pso_step(X, V, pbest, gbest, w, bounds: Bounds, rng, c1=2.0, c2=2.0, vmax_frac=0.2):
    """One inertia-weight velocity/position update; returns ``(X, V)``."""
    r1 = rng.random(X.shape)
    r2 = rng.random(X.shape)
    V = w * V + c1 * r1 * (pbest - X) + c2 * r2 * (gbest - X)
    vmax = vmax_frac * bounds.width
    V = np.clip(V, -vmax, vmax)
    return bounds.clip(X + V), V


def run_pso(objective, bounds: Bounds, cfg: OptimizerConfig) -> OptimizerResult:
    rng = np.random.default_rng(cfg.seed)
    tr = _Tracker(objective, cfg.workers)
    X = bounds.sample(rng, cfg.population)
    V = np.zeros_like(X)
    f = tr.evaluate(X)
    pbest, pf = X.copy(), f.copy()
    tr.close_iteration()
    for it in range(1, cfg.iterations):
        w = cfg.w_start - (cfg.w_start - cfg.w_end) * it / max(1, cfg.iterations - 1)
        X, V = pso_step(X, V, pbest, tr.best_x, w, bounds, rng, cfg.c1, cfg.c2, cfg.vmax_frac)
        f = tr.evaluate(X)
        better = f < pf
        pbest[better] = X[better]
        pf[better] = f[better]
        tr.close_iteration()
    return tr.result("PSO")


def de_trials(X, bounds: Bounds, rng, F=0.5, CR=0.9):
    """DE/rand/1/bin trial vectors for every member of ``X``."""
    N, d = X.shape
    trials = np.empty_like(X)
    for i in range(N):
        others = np.delete(np.arange(N), i)
        r1, r2, r3 = rng.choice(others, 3, replace=False)
        mutant = bounds.clip(X[r1] + F * (X[r2] - X[r3]))
        cross = rng.random(d) < CR
        cross[rng.integers(d)] = True
        trials[i] = np.where(cross, mutant, X[i])
    return trials


def run_de(objective, bounds: Bounds, cfg: OptimizerConfig) -> OptimizerResult:
    rng = np.random.default_rng(cfg.seed)
    tr = _Tracker(objective, cfg.workers)
    X = bounds.sample(rng, cfg.population)
    f = tr.evaluate(X)
    tr.close_iteration()
    for _ in range(1, cfg.iterations):
        U = de_trials(X, bounds, rng, cfg.F, cfg.CR)
        fu = tr.evaluate(U)
        better = fu < f
        X[better] = U[better]
        f[better] = fu[better]
        tr.close_iteration()
    return tr.result("DE")


def social_force(r, f=0.5, l=1.5):
    """Attraction/repulsion strength between grasshoppers at distance ``r``."""
    return f * np.exp(-r / l) - np.exp(-r)


@dataclass
class GoaState:
    positions: np.ndarray
    target: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    c: float = 1.0
    attraction: float = 0.5
    length_scale: float = 1.5


def goa_position_update(state: GoaState) -> np.ndarray:
    """New grasshopper positions, clamped to the box.

    ``X_i^d = c * sum_{j != i} c (ub_d - lb_d)/2 s(|x_j^d - x_i^d|) (x_j^d - x_i^d) / d_ij + T_d``
    """
    X = np.asarray(state.positions, dtype=float)
    diff = X[None, :, :] - X[:, None, :]  # diff[i, j] = x_j - x_i
    dist = np.maximum(np.linalg.norm(diff, axis=2), 1e-12)
    s = social_force(np.abs(diff), state.attraction, state.length_scale)
    half_width = (state.upper - state.lower) / 2
    terms = state.c * half_width * s * diff / dist[:, :, None]
    idx = np.arange(len(X))
    terms[idx, idx, :] = 0.0
    new = state.c * terms.sum(axis=1) + state.target
    return np.clip(new, state.lower, state.upper)


def run_goa(objective, bounds: Bounds, cfg: OptimizerConfig) -> OptimizerResult:
    rng = np.random.default_rng(cfg.seed)
    tr = _Tracker(objective, cfg.workers)
    X = bounds.sample(rng, cfg.population)
    tr.evaluate(X)
    tr.close_iteration()
    for it in range(1, cfg.iterations):
        c = cfg.c_max - (cfg.c_max - cfg.c_min) * it / max(1, cfg.iterations - 1)
        state = GoaState(X, tr.best_x, bounds.lower, bounds.upper, c,
                         cfg.attraction, cfg.length_scale)
        X = goa_position_update(state)
        tr.evaluate(X)
        tr.close_iteration()
    return tr.result("GOA")


_ALGORITHMS = {"PSO": run_pso, "DE": run_de, "GOA": run_goa}


def optimize(objective: Callable[[np.ndarray], float], bounds: Bounds | None = None,
             cfg: OptimizerConfig | None = None) -> OptimizerResult:
    bounds = bounds or Bounds()
    cfg = cfg or OptimizerConfig()
    return _ALGORITHMS[cfg.algorithm](objective, bounds, cfg)


def _phase_crossing(tf: TransferFunction, target=-math.pi, w_min=1e-3, w_max=1e4, n=4000):
    w = np.logspace(math.log10(w_min), math.log10(w_max), n)
    ph = np.unwrap(np.angle(tf.freqresp(w)))
    g = ph - target
    idx = np.flatnonzero((g[:-1] > 0) & (g[1:] <= 0))
    if idx.size == 0:
        return None
    i = int(idx[0])

    def phase(x):
        raw = float(np.angle(tf(1j * x)))
        return ph[i] + (raw - ph[i] + math.pi) % (2 * math.pi) - math.pi

    lo, hi = w[i], w[i + 1]
    while hi - lo > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if phase(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ultimate_gain(p: AvrParams) -> tuple[float, float]:
    """Ultimate gain and period of the plant loop under pure proportional control."""
    L = loop_tf(p, PidGains(1.0, 0.0, 0.0))
    return ultimate_gain_of(L)


def ultimate_gain_of(L: TransferFunction) -> tuple[float, float]:
    w180 = _phase_crossing(L)
    if w180 is None:
        raise NotTunableError("loop phase never reaches -180 degrees")
    Ku = 1.0 / abs(L(1j * w180))
    return Ku, 2 * math.pi / w180


def ziegler_nichols(p: AvrParams) -> PidGains:
    """Classic ultimate-cycle table: Kp = 0.6 Ku, Ki = 1.2 Ku/Tu, Kd = 0.075 Ku Tu."""
    Ku, Tu = ultimate_gain(p)
    return PidGains(0.6 * Ku, 1.2 * Ku / Tu, 0.075 * Ku * Tu)
