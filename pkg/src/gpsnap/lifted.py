"""Finite-horizon (lifted) signal algebra and the fixed feedback loop.

A causal SISO LTI system over ``N`` samples is the lower-triangular Toeplitz
matrix of its impulse response. Such matrices commute, so the closed loop of
the plant ``G`` and controller ``C`` is fully described by the impulse
responses of ``S = (1 + G C)^-1`` and ``G S``:

    e = S r - (G S) f
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize, signal

from .errors import DesignError, InstabilityError, InvalidInputError
from .modal import FrozenPlant, frequency_response, padd

__all__ = [
    "LiftedLti",
    "Controller",
    "impulse_response",
    "toeplitz",
    "apply",
    "design_lead_controller",
    "sensitivity_lifted",
    "process_lifted",
    "closed_loop_error",
    "closed_loop_poles",
    "loop_response",
    "crossover_frequency",
    "phase_margin",
]

# error samples beyond this magnitude mean the loop has blown up
OVERFLOW_GUARD = 1e12
# repeated roots at z = 1 are only located to ~sqrt(eps)
POLE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LiftedLti:
    h: np.ndarray

    @property
    def n(self):
        return self.h.size

    def matrix(self):
        return toeplitz(self.h)

    def __matmul__(self, other):
        if isinstance(other, LiftedLti):
            return LiftedLti(_causal_conv(self.h, other.h))
        return apply(self, other)


@dataclass(frozen=True)
class Controller:
    """Rational filter ``gain * b(q^-1) / a(q^-1)``."""
    b: tuple
    a: tuple
    gain: float
    ts: float

    @property
    def num(self):
        return self.gain * np.asarray(self.b, dtype=float)

    @property
    def den(self):
        return np.asarray(self.a, dtype=float)

    def scaled(self, factor):
        return Controller(self.b, self.a, self.gain * factor, self.ts)

    def response(self, omega):
        zinv = np.exp(-1j * np.asarray(omega, dtype=float) * self.ts)
        return (np.polyval(self.num[::-1], zinv) / np.polyval(self.den[::-1], zinv))


def _causal_conv(x, y):
    n = len(x)
    return np.convolve(x, y)[:n]


def toeplitz(h):
    """Lower-triangular Toeplitz (convolution) matrix of ``h``."""
    h = np.asarray(h, dtype=float)
    return linalg.toeplitz(h, np.zeros_like(h))


def impulse_response(system, n):
    """First ``n`` samples of the unit-impulse response.

    ``system`` is a :class:`FrozenPlant`, a :class:`Controller` or a
    ``(b, a)`` pair in ascending powers of q^-1.
    """
    if n < 1:
        raise InvalidInputError("impulse response length must be >= 1")
    imp = np.zeros(n)
    imp[0] = 1.0
    if isinstance(system, FrozenPlant):
        return sum(signal.lfilter(b, a, imp) for b, a in system.sections)
    if isinstance(system, Controller):
        return signal.lfilter(system.num, system.den, imp)
    b, a = system
    return signal.lfilter(b, a, imp)


def apply(lifted, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (lifted.n,):
        raise InvalidInputError(f"signal length {u.size} does not match operator size {lifted.n}")
    return _causal_conv(lifted.h, u)


def loop_response(frozen, c, omega):
    return c.response(omega) * frequency_response(frozen, omega)


def _backward_lead(bandwidth_hz, ts):
    """Lead (1 + s/wz) / (1 + s/wp) with s = (1 - q^-1) / Ts."""
    wz = 2 * np.pi * bandwidth_hz / 3
    wp = 2 * np.pi * bandwidth_hz * 3
    b = np.array([1 + 1 / (wz * ts), -1 / (wz * ts)])
    a = np.array([1 + 1 / (wp * ts), -1 / (wp * ts)])
    return b / a[0], a / a[0]


def closed_loop_poles(frozen, c):
    bg, ag = frozen.transfer_function()
    char = padd(np.convolve(ag, c.den), np.convolve(bg, c.num))
    # ascending q^-1 coefficients are descending powers of z
    return np.roots(np.trim_zeros(char, "b"))


def phase_margin(frozen, c, f_cross):
    w = 2 * np.pi * f_cross
    return 180.0 + np.degrees(np.angle(loop_response(frozen, c, w)))


def design_lead_controller(plant_nominal, bandwidth_hz, min_phase_margin=30.0):
    """Lead filter plus gain giving unit loop gain at ``bandwidth_hz``."""
    ts = plant_nominal.ts
    if not 0 < bandwidth_hz < 0.5 / ts / 3:
        raise DesignError(f"bandwidth {bandwidth_hz} Hz not realisable at Ts={ts}")
    b, a = _backward_lead(bandwidth_hz, ts)
    unit = Controller(tuple(b), tuple(a), 1.0, ts)
    w_bw = 2 * np.pi * bandwidth_hz
    gain = 1.0 / abs(loop_response(plant_nominal, unit, w_bw))
    c = unit.scaled(gain)

    f_cross = crossover_frequency(plant_nominal, c)
    if f_cross is None or abs(f_cross / bandwidth_hz - 1) > 0.02:
        raise DesignError(f"crossover at {f_cross} Hz instead of {bandwidth_hz} Hz")
    pm = phase_margin(plant_nominal, c, f_cross)
    if pm < min_phase_margin:
        raise DesignError(f"phase margin {pm:.1f} deg below {min_phase_margin}")
    if np.any(np.abs(closed_loop_poles(plant_nominal, c)) >= 1):
        raise DesignError("designed loop is unstable")
    return c


def crossover_frequency(frozen, c, f_lo=None, n=20000):
    """Lowest frequency (Hz) where the loop gain drops through 1."""
    f_nyq = 0.5 / frozen.ts
    f_lo = f_nyq * 1e-5 if f_lo is None else f_lo
    f = np.geomspace(f_lo, f_nyq * 0.999, n)
    mag = np.abs(loop_response(frozen, c, 2 * np.pi * f))
    idx = np.flatnonzero((mag[:-1] >= 1) & (mag[1:] < 1))
    if idx.size == 0:
        return None
    k = idx[0]
    fn = lambda lf: np.log(abs(loop_response(frozen, c, 2 * np.pi * np.exp(lf))))
    return float(np.exp(optimize.brentq(fn, np.log(f[k]), np.log(f[k + 1]), xtol=1e-14)))


def sensitivity_lifted(frozen, c, n):
    """Lifted ``S = (I + G C)^-1`` by forward substitution."""
    # marginal poles (e.g. C = 0 on a rigid body) cancel in S; only reject growth
    if np.any(np.abs(closed_loop_poles(frozen, c)) > 1 + POLE_TOL):
        raise InstabilityError(f"closed loop unstable at rho={frozen.rho}")
    loop = _causal_conv(impulse_response(frozen, n), impulse_response(c, n))
    s = np.empty(n)
    d0 = 1.0 + loop[0]
    s[0] = 1.0 / d0
    # (I + T(loop)) s = e_0, solved column-wise on the Toeplitz structure
    for k in range(1, n):
        s[k] = -np.dot(loop[k:0:-1], s[:k]) / d0
    if not np.all(np.isfinite(s)) or np.max(np.abs(s)) > OVERFLOW_GUARD:
        raise InstabilityError(f"closed loop unstable at rho={frozen.rho}")
    return LiftedLti(s)


def process_lifted(frozen, c, n, sens=None):
    """Lifted ``G S`` (plant input to error)."""
    sens = sensitivity_lifted(frozen, c, n) if sens is None else sens
    return LiftedLti(_causal_conv(impulse_response(frozen, n), sens.h))


def closed_loop_error(frozen, c, traj, f, sens=None):
    """Tracking error of the loop driven by reference ``traj.pos`` and feedforward ``f``."""
    r = traj.pos if hasattr(traj, "pos") else np.asarray(traj, dtype=float)
    f = np.asarray(f, dtype=float)
    if f.shape != r.shape:
        raise InvalidInputError("feedforward and reference lengths differ")
    if not np.all(np.isfinite(f)):
        raise InvalidInputError("feedforward contains non-finite samples")
    sens = sensitivity_lifted(frozen, c, r.size) if sens is None else sens
    gs = process_lifted(frozen, c, r.size, sens)
    e = apply(sens, r) - apply(gs, f)
    if not np.all(np.isfinite(e)) or np.max(np.abs(e)) > OVERFLOW_GUARD:
        raise InstabilityError(f"error signal diverged at rho={frozen.rho}")
    return e
