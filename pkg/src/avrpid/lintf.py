"""Polynomial and transfer-function algebra for the four-block AVR loop.

Polynomials are stored in ascending powers of ``s`` (``coeffs[k]`` multiplies
``s**k``). Nothing in this module cancels common poles and zeros: a PID
controller in series with the plant keeps its ``s/s`` factor, so pole reports
stay faithful to the uncancelled rational functions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvalidParameterError(ValueError):
    """A gain or time constant outside its admissible domain."""


class DegenerateLoopError(ValueError):
    """A feedback connection whose denominator vanishes identically."""


class ImproperSystemError(ValueError):
    """Numerator degree exceeds denominator degree."""


class NoRootsError(ValueError):
    """Root finding requested for a constant polynomial."""


def _trim(coeffs: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(coeffs)
    if nz.size == 0:
        return np.zeros(1)
    return coeffs[: nz[-1] + 1]


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial in ``s`` with ascending coefficients."""

    coeffs: np.ndarray

    def __init__(self, coeffs: Sequence[float] | np.ndarray):
        arr = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("polynomial needs a nonempty 1-D coefficient sequence")
        arr = _trim(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0.0

    @property
    def leading(self) -> float:
        return float(self.coeffs[-1])

    def __call__(self, s):
        # np.polyval wants descending order
        return np.polyval(self.coeffs[::-1], s)

    def __add__(self, other: Polynomial) -> Polynomial:
        n = max(len(self.coeffs), len(other.coeffs))
        out = np.zeros(n)
        out[: len(self.coeffs)] += self.coeffs
        out[: len(other.coeffs)] += other.coeffs
        return Polynomial(out)

    def __mul__(self, other: Polynomial | float) -> Polynomial:
        if isinstance(other, Polynomial):
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * float(other))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self) -> int:
        return hash(self.coeffs.tobytes())

    def __repr__(self) -> str:
        return f"Polynomial({self.coeffs.tolist()})"


@dataclass(frozen=True)
class TransferFunction:
    num: Polynomial
    den: Polynomial

    def __init__(self, num, den):
        num = num if isinstance(num, Polynomial) else Polynomial(num)
        den = den if isinstance(den, Polynomial) else Polynomial(den)
        if den.is_zero:
            raise DegenerateLoopError("transfer function denominator is the zero polynomial")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def freqresp(self, omega) -> np.ndarray:
        return self(1j * np.asarray(omega, dtype=float))

    @property
    def is_proper(self) -> bool:
        return self.num.is_zero or self.num.degree <= self.den.degree

    def dc_gain(self) -> float:
        """Value at ``s = 0``; the limit is taken when ``s`` divides both polynomials."""
        num, den = self.num.coeffs, self.den.coeffs
        k = 0
        while k < len(den) - 1 and den[k] == 0.0 and (k >= len(num) or num[k] == 0.0):
            k += 1
        n0 = num[k] if k < len(num) else 0.0
        if den[k] == 0.0:
            return math.inf if n0 != 0.0 else math.nan
        return float(n0 / den[k])

    def poles(self) -> np.ndarray:
        return poly_roots(self.den) if self.den.degree >= 1 else np.zeros(0, complex)

    def zeros(self) -> np.ndarray:
        return poly_roots(self.num) if self.num.degree >= 1 else np.zeros(0, complex)


@dataclass(frozen=True)
class AvrParams:
    """Gains and time constants (seconds) of amplifier, exciter, generator, sensor."""

    K_A: float = 10.0
    T_A: float = 0.1
    K_E: float = 1.0
    T_E: float = 0.4
    K_G: float = 1.0
    T_G: float = 1.0
    K_S: float = 1.0
    T_S: float = 0.01

    # admissible ranges per block: (gain range, time-constant range)
    RANGES = {
        "K_A": (10.0, 40.0), "T_A": (0.02, 0.1),
        "K_E": (1.0, 10.0), "T_E": (0.5, 1.0),
        "K_G": (0.7, 1.0), "T_G": (1.0, 2.0),
        "K_S": (1.0, 2.0), "T_S": (0.001, 0.06),
    }

    def __post_init__(self):
        for name in self.RANGES:
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidParameterError(f"{name} must be strictly positive, got {v!r}")

    def validate_ranges(self) -> list[str]:
        """Warn about values outside the customary ranges; returns the offending names."""
        bad = []
        for name, (lo, hi) in self.RANGES.items():
            v = getattr(self, name)
            if not lo <= v <= hi:
                bad.append(name)
                warnings.warn(f"{name}={v} outside customary range [{lo}, {hi}]", stacklevel=2)
        return bad

    @property
    def loop_gain(self) -> float:
        return self.K_A * self.K_E * self.K_G * self.K_S

    def as_dict(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in self.RANGES}

    def replace(self, **changes) -> AvrParams:
        return AvrParams(**{**self.as_dict(), **changes})


@dataclass(frozen=True)
class PidGains:
    K_p: float
    K_i: float
    K_d: float

    def __post_init__(self):
        for name in ("K_p", "K_i", "K_d"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {v!r}")

    @property
    def T_i(self) -> float:
        if self.K_i <= 0:
            raise InvalidParameterError("integral time undefined for K_i = 0")
        return self.K_p / self.K_i

    @property
    def T_d(self) -> float:
        if self.K_p <= 0:
            raise InvalidParameterError("derivative time undefined for K_p = 0")
        return self.K_d / self.K_p

    @classmethod
    def from_array(cls, x) -> PidGains:
        return cls(float(x[0]), float(x[1]), float(x[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.K_p, self.K_i, self.K_d])

    @property
    def is_zero(self) -> bool:
        return self.K_p == 0 and self.K_i == 0 and self.K_d == 0


@dataclass(frozen=True)
class StateSpaceModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))

    @property
    def n_states(self) -> int:
        return self.A.shape[0]


def block_tf(K: float, T: float) -> TransferFunction:
    """First-order lag ``K / (1 + T s)``."""
    if not (np.isfinite(K) and K > 0):
        raise InvalidParameterError(f"gain must be positive, got {K!r}")
    if not (np.isfinite(T) and T > 0):
        raise InvalidParameterError(f"time constant must be positive, got {T!r}")
    return TransferFunction([K], [1.0, T])


def pid_tf(gains: PidGains) -> TransferFunction:
    return TransferFunction([gains.K_i, gains.K_p, gains.K_d], [0.0, 1.0])


def tf_series(a: TransferFunction, b: TransferFunction) -> TransferFunction:
    return TransferFunction(a.num * b.num, a.den * b.den)


def tf_feedback(forward: TransferFunction, feedback: TransferFunction) -> TransferFunction:
    """Negative-feedback connection ``G / (1 + G H)`` over a common denominator."""
    num = forward.num * feedback.den
    den = forward.den * feedback.den + forward.num * feedback.num
    if den.is_zero:
        raise DegenerateLoopError("closed-loop denominator vanishes identically")
    return TransferFunction(num, den)


def _plant_blocks(p: AvrParams):
    return (block_tf(p.K_A, p.T_A), block_tf(p.K_E, p.T_E),
            block_tf(p.K_G, p.T_G), block_tf(p.K_S, p.T_S))


def avr_closed_loop(p: AvrParams) -> TransferFunction:
    """Terminal voltage over reference for the uncontrolled AVR."""
    amp, exc, gen, sen = _plant_blocks(p)
    return tf_feedback(tf_series(tf_series(amp, exc), gen), sen)


def avr_pid_closed_loop(p: AvrParams, g: PidGains) -> TransferFunction:
    amp, exc, gen, sen = _plant_blocks(p)
    fwd = tf_series(tf_series(tf_series(pid_tf(g), amp), exc), gen)
    return tf_feedback(fwd, sen)


def loop_tf(p: AvrParams, g: PidGains) -> TransferFunction:
    """Open-loop ``PID * amplifier * exciter * generator * sensor``."""
    amp, exc, gen, sen = _plant_blocks(p)
    out = pid_tf(g)
    for blk in (amp, exc, gen, sen):
        out = tf_series(out, blk)
    return out


def tf_to_state_space(tf: TransferFunction) -> StateSpaceModel:
    """Controllable canonical realisation (last row of ``A`` holds the characteristic coefficients)."""
    if not tf.is_proper:
        raise ImproperSystemError(
            f"numerator degree {tf.num.degree} exceeds denominator degree {tf.den.degree}")
    lead = tf.den.leading
    a = tf.den.coeffs / lead
    n = tf.den.degree
    b = np.zeros(n + 1)
    b[: len(tf.num.coeffs)] = tf.num.coeffs / lead
    d = b[n]
    A = np.zeros((n, n))
    if n:
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -a[:n]
    B = np.zeros((n, 1))
    if n:
        B[-1, 0] = 1.0
    C = (b[:n] - d * a[:n]).reshape(1, n)
    return StateSpaceModel(A, B, C, np.array([[d]]))


def ss_to_tf(ss: StateSpaceModel) -> TransferFunction:
    """Reconstruct ``C (sI - A)^-1 B + D`` for a single-input single-output model."""
    n = ss.n_states
    d = float(ss.D.ravel()[0])
    if n == 0:
        return TransferFunction([d], [1.0])
    # characteristic polynomial from eigenvalues, numerator from the Faddeev-LeVerrier recursion
    char = np.zeros(n + 1)
    char[n] = 1.0
    M = np.zeros((n, n))
    num = np.zeros(n + 1)
    I = np.eye(n)
    for k in range(1, n + 1):
        M = ss.A @ M + char[n - k + 1] * I
        char[n - k] = -np.trace(ss.A @ M) / k
        num[n - k] = (ss.C @ M @ ss.B).item()
    return TransferFunction(num + d * char, char)


def poly_roots(poly: Polynomial) -> np.ndarray:
    """All roots with multiplicity, from the eigenvalues of the companion matrix."""
    if poly.degree < 1:
        raise NoRootsError("a constant polynomial has no roots")
    c = poly.coeffs
    # leading zero roots are exact; strip them so the companion matrix stays well posed
    nz = int(np.flatnonzero(c)[0])
    monic = c[nz:] / c[-1]
    m = len(monic) - 1
    roots = np.zeros(nz, dtype=complex)
    if m == 0:
        return roots
    comp = np.zeros((m, m))
    comp[1:, :-1] = np.eye(m - 1)
    comp[:, -1] = -monic[:m]
    # geev balances before the Hessenberg QR iteration
    eig = np.linalg.eigvals(comp).astype(complex)
    return _sort_roots(np.concatenate([roots, eig]))


def _sort_roots(r: np.ndarray) -> np.ndarray:
    # most negative real part first, then positive imaginary before its conjugate
    return np.array(sorted(r, key=lambda z: (round(z.real, 9), -z.imag)), dtype=complex)


def poly_from_roots(roots, lead: float = 1.0) -> Polynomial:
    desc = np.poly(np.asarray(roots, dtype=complex))
    return Polynomial(np.real_if_close(desc[::-1] * lead, tol=1e6).real)
