"""Step and load-disturbance responses of LTI systems on a uniform time grid.

Propagation is the exact zero-order-hold discretisation of the continuous
model: ``x[k+1] = Phi x[k] + Gamma u[k]`` with ``Phi = expm(A dt)``.  To keep
the Python-level loop short, samples are produced in blocks: the state is
advanced block-to-block with ``Phi**m`` and every sample inside a block is an
affine function of the block's initial state.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import expm

from .lintf import (
    AvrParams,
    PidGains,
    Polynomial,
    StateSpaceModel,
    TransferFunction,
    avr_closed_loop,
    avr_pid_closed_loop,
    poly_roots,
    tf_to_state_space,
)


class SimulationOverflowError(ArithmeticError):
    def __init__(self, index: int):
        super().__init__(f"non-finite state at sample {index}")
        self.index = index


class UnstableLoopError(ValueError):
    def __init__(self, poles):
        self.poles = np.asarray(poles)
        worst = max(self.poles, key=lambda z: z.real)
        super().__init__(f"closed loop is unstable (rightmost pole {worst:.6g})")


@dataclass(frozen=True)
class SimGrid:
    dt: float = 1e-3
    horizon: float = 10.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ValueError("horizon must be at least one step")

    @property
    def n_samples(self) -> int:
        # tolerate horizon/dt landing a hair below an integer
        return int(math.floor(self.horizon / self.dt + 1e-9)) + 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def index_of(self, time: float) -> int:
        return int(round(time / self.dt))


@dataclass(frozen=True)
class StepResponse:
    grid: SimGrid
    v: np.ndarray
    reference: float = 1.0

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    @property
    def error(self) -> np.ndarray:
        return self.reference - self.v


@dataclass(frozen=True)
class DisturbanceEvent:
    time: float
    magnitude: float = 0.10


def discretize(ss: StateSpaceModel, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact ZOH pair ``(Phi, Gamma)``; the block-matrix exponential also covers singular ``A``."""
    n, m = ss.B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = ss.A
    M[:n, n:] = ss.B
    E = expm(M * dt)
    return E[:n, :n], E[:n, n:]


def _propagate(Phi, Gamma, C, D, u, x0, n_steps):
    """Outputs ``y[0..n_steps]`` and the final state for constant input ``u``."""
    n = Phi.shape[0]
    gu = Gamma @ u
    du = float((D @ u)[0])
    total = n_steps + 1
    if n == 0:
        return np.full(total, du), x0
    m = max(1, int(math.ceil(math.sqrt(total))))
    P = np.empty((m, n, n))
    g = np.empty((m, n))
    P[0] = np.eye(n)
    g[0] = 0.0
    for j in range(1, m):
        P[j] = Phi @ P[j - 1]
        g[j] = Phi @ g[j - 1] + gu
    Pm = Phi @ P[m - 1]
    gm = Phi @ g[m - 1] + gu
    n_blocks = -(-total // m)
    X = np.empty((n_blocks, n))
    X[0] = x0
    for c in range(1, n_blocks):
        X[c] = Pm @ X[c - 1] + gm
    c_row = C.reshape(-1)
    CP = np.einsum("k,jkl->jl", c_row, P)  # row j is C Phi^j
    Cg = g @ c_row + du
    y = (X @ CP.T + Cg).reshape(-1)[:total]
    last = n_steps // m, n_steps % m
    x_end = P[last[1]] @ X[last[0]] + g[last[1]]
    return y, x_end


def simulate(ss: StateSpaceModel, grid: SimGrid, inputs, x0=None) -> np.ndarray:
    """Output of ``ss`` under a piecewise-constant input schedule.

    ``inputs`` is a sequence of ``(start_index, u)`` pairs with increasing
    start indices, the first at 0; each ``u`` holds until the next change.
    """
    Phi, Gamma = discretize(ss, grid.dt)
    n = ss.n_states
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    N = grid.n_samples
    out = np.empty(N)
    sched = list(inputs)
    if not sched or sched[0][0] != 0:
        raise ValueError("input schedule must start at sample 0")
    for i, (k0, u) in enumerate(sched):
        k1 = sched[i + 1][0] if i + 1 < len(sched) else N - 1
        u = np.atleast_1d(np.asarray(u, dtype=float))
        with np.errstate(over="ignore", invalid="ignore"):
            y, x = _propagate(Phi, Gamma, ss.C, ss.D, u, x, k1 - k0)
        if i + 1 < len(sched):
            out[k0:k1] = y[:-1]
        else:
            out[k0:] = y
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise SimulationOverflowError(int(bad[0]))
    return out


def step_response(ss: StateSpaceModel, grid: SimGrid | None = None,
                  amplitude: float = 1.0, reference: float | None = None) -> StepResponse:
    grid = grid or SimGrid()
    v = simulate(ss, grid, [(0, amplitude)])
    return StepResponse(grid, v, amplitude if reference is None else reference)


def tf_step_response(tf: TransferFunction, grid: SimGrid | None = None,
                     amplitude: float = 1.0) -> StepResponse:
    return step_response(tf_to_state_space(tf), grid, amplitude)


def _plant_polys(p: AvrParams):
    lag = lambda T: Polynomial([1.0, T])  # noqa: E731
    return lag(p.T_A), lag(p.T_E), lag(p.T_G), lag(p.T_S)


def disturbance_tf(p: AvrParams, g: PidGains | None) -> TransferFunction:
    """Terminal voltage over a load disturbance added at the generator input.

    The denominator is written exactly like the reference loop's so both
    channels share one realisation.
    """
    pa, pe, pg, ps = _plant_polys(p)
    if g is None:
        return TransferFunction(p.K_G * pa * pe * ps, avr_closed_loop(p).den)
    s = Polynomial([0.0, 1.0])
    return TransferFunction(p.K_G * s * pa * pe * ps, avr_pid_closed_loop(p, g).den)


def two_input_model(reference: TransferFunction, disturbance: TransferFunction) -> StateSpaceModel:
    """Observable-form realisation with inputs ``[reference, disturbance]``.

    Both transfer functions must share the same denominator.
    """
    if reference.den != disturbance.den:
        raise ValueError("channels must share a denominator")
    r = tf_to_state_space(reference)
    d = tf_to_state_space(disturbance)
    A = r.A.T
    B = np.hstack([r.C.T, d.C.T])
    C = r.B.T
    D = np.hstack([r.D, d.D])
    return StateSpaceModel(A, B, C, D)


def scenario_response(p: AvrParams, g: PidGains | None, events: Iterable[DisturbanceEvent] = (),
                      grid: SimGrid | None = None, reference: float = 1.0) -> StepResponse:
    """Unit reference step plus persistent load steps entering the generator.

    ``g=None`` simulates the loop without a controller.  Event times are
    snapped to the nearest grid sample.
    """
    grid = grid or SimGrid(horizon=8.0)
    events = list(events)
    if any(b.time < a.time for a, b in zip(events, events[1:])):
        raise ValueError("events must be sorted by time")
    for ev in events:
        if not 0 <= ev.time <= grid.horizon:
            raise ValueError(f"event at {ev.time} s lies outside the grid")
    ref_tf = avr_closed_loop(p) if g is None else avr_pid_closed_loop(p, g)
    poles = poly_roots(ref_tf.den)
    if np.any(poles.real >= 0):
        raise UnstableLoopError(poles)
    model = two_input_model(ref_tf, disturbance_tf(p, g))
    sched = [(0, (reference, 0.0))]
    level = 0.0
    for ev in events:
        level += ev.magnitude
        k = grid.index_of(ev.time)
        if k == sched[-1][0]:
            sched[-1] = (k, (reference, level))
        else:
            sched.append((k, (reference, level)))
    v = simulate(model, grid, sched)
    return StepResponse(grid, v, reference)


def write_csv(r: StepResponse, path_or_buf) -> None:
    """Write ``t,v`` rows at full double precision."""
    close = False
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        fh = open(path_or_buf, "w", newline="")
        close = True
    else:
        fh = path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "v"])
        for t, v in zip(r.t, r.v):
            w.writerow([repr(float(t)), repr(float(v))])
    finally:
        if close:
            fh.close()


def read_csv(path_or_buf, reference: float = 1.0) -> StepResponse:
    """Load a ``t,v`` trajectory; the time column must be uniformly spaced from 0."""
    if isinstance(path_or_buf, str) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, newline="") as fh:
            text = fh.read()
    else:
        text = path_or_buf.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["t", "v"]:
        raise ValueError("expected header 't,v'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    if len(data) < 2:
        raise ValueError("need at least two samples")
    t, v = data[:, 0], data[:, 1]
    dt = t[1] - t[0]
    if t[0] != 0 or dt <= 0 or not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-12):
        raise ValueError("time column must start at 0 and be uniformly spaced")
    grid = SimGrid(dt=float(dt), horizon=float(t[-1]))
    if grid.n_samples != len(v):
        raise ValueError("time column inconsistent with sample count")
    return StepResponse(grid, v, reference)
