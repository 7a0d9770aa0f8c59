"""Position-dependent modal model of a free-free flexible beam.

The plant is a sum of one translational rigid-body mode and ``n_f`` flexible
modes whose gains depend on the sensor position ``rho``:

    G(rho, q^-1) = c_l b_l Ts^2 / (1 - q^-1)^2
                 + sum_i D_i(rho) / ((1 - q^-1)^2 / Ts^2 + 2 zeta_i w_i (1 - q^-1) / Ts + w_i^2)

with ``D_i(rho) = phi_i(rho) * b_i`` and ``b_i`` the actuator-weighted mode
shape. Mode shapes are scaled so that ``integral(mu * phi_i^2) = 1`` with
``mu = mass / length``; the rigid mode then has ``phi_0 = 1/sqrt(mass)`` and
every ``c b`` product carries units of 1/kg.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, signal

from .errors import InvalidConfigError, InvalidInputError, OutOfRangeError

__all__ = [
    "BeamConfig",
    "FlexMode",
    "ModalPlant",
    "FrozenPlant",
    "free_free_roots",
    "build_free_free_beam",
    "mode_shape",
    "freeze",
    "frequency_response",
    "compliance",
    "analytic_snap",
    "simulate",
]

_RANGE_TOL = 1e-12


@lru_cache(maxsize=None)
def free_free_roots(n):
    """First ``n`` positive roots of ``cos(x) cosh(x) = 1`` (rigid root excluded)."""
    roots = []
    for i in range(1, n + 1):
        centre = (i + 0.5) * np.pi
        # cos(x) - 1/cosh(x) avoids overflow of cosh for high modes
        fn = lambda x: np.cos(x) - 1.0 / np.cosh(x)
        roots.append(optimize.brentq(fn, centre - 0.4, centre + 0.4, xtol=1e-15))
    return tuple(roots)


def _raw_shape(beta, sigma, x):
    bx = beta * np.asarray(x, dtype=float)
    return np.cosh(bx) + np.cos(bx) - sigma * (np.sinh(bx) + np.sin(bx))


@dataclass(frozen=True)
class FlexMode:
    omega: float
    zeta: float
    beta: float
    sigma_shape: float
    scale: float = 1.0  # multiplies the raw eigenfunction

    def __post_init__(self):
        if not self.omega > 0:
            raise InvalidConfigError(f"mode frequency must be positive, got {self.omega}")
        if not 0 < self.zeta < 1:
            raise InvalidConfigError(f"damping ratio must lie in (0, 1), got {self.zeta}")
        if not self.beta > 0:
            raise InvalidConfigError(f"beta must be positive, got {self.beta}")


@dataclass(frozen=True)
class BeamConfig:
    mass: float = 1.0
    length: float = 0.5
    f1: float = 40.0
    zeta: float = 0.02
    ts: float = 1.0 / 4000.0
    n_flex: int = 2
    actuator_positions: tuple = (0.0, 0.5)
    actuator_weights: tuple = (0.5, 0.5)

    def __post_init__(self):
        for name in ("mass", "length", "f1", "ts"):
            if not getattr(self, name) > 0:
                raise InvalidConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_flex < 0:
            raise InvalidConfigError("n_flex must be non-negative")
        if len(self.actuator_positions) != len(self.actuator_weights):
            raise InvalidConfigError("actuator positions and weights differ in length")


@dataclass(frozen=True)
class ModalPlant:
    mass: float
    length: float
    ts: float
    flex_modes: tuple = ()
    actuator_positions: tuple = ((0.0, 1.0),)
    rigid_gain: float = field(init=False)

    def __post_init__(self):
        if not self.mass > 0 or not self.length > 0 or not self.ts > 0:
            raise InvalidConfigError("mass, length and ts must be positive")
        weights = [w for _, w in self.actuator_positions]
        if abs(sum(weights) - 1.0) > 1e-12:
            raise InvalidConfigError(f"actuator weights must sum to 1, got {sum(weights)}")
        object.__setattr__(self, "rigid_gain", 1.0 / self.mass)

    @property
    def n_flex(self):
        return len(self.flex_modes)

    def input_gains(self):
        """Actuator-weighted mode shapes b_i, one per flexible mode."""
        return np.array([
            sum(w * mode_shape(self, i, x) for x, w in self.actuator_positions)
            for i in range(1, self.n_flex + 1)
        ])

    def modal_gains(self, rho):
        """D_i(rho) = c_i(rho) b_i for every flexible mode (units 1/kg)."""
        _check_position(self, rho)
        b = self.input_gains()
        c = np.array([mode_shape(self, i, rho) for i in range(1, self.n_flex + 1)])
        return c * b


def _check_position(plant, x):
    if not np.isfinite(x) or x < -_RANGE_TOL or x > plant.length + _RANGE_TOL:
        raise OutOfRangeError(f"position {x} outside beam [0, {plant.length}]")


def build_free_free_beam(cfg=None):
    """Construct the benchmark beam from a :class:`BeamConfig`."""
    cfg = BeamConfig() if cfg is None else cfg
    L = cfg.length
    roots = free_free_roots(cfg.n_flex) if cfg.n_flex else ()
    zetas = np.broadcast_to(np.asarray(cfg.zeta, dtype=float), (cfg.n_flex,))
    omega1 = 2 * np.pi * cfg.f1
    modes = []
    for i, root in enumerate(roots):
        beta = root / L
        sigma = (np.cosh(root) - np.cos(root)) / (np.sinh(root) - np.sin(root))
        norm2, _ = integrate.quad(lambda x: _raw_shape(beta, sigma, x) ** 2, 0.0, L,
                                  epsabs=0.0, epsrel=1e-13, limit=200)
        # integral(mu phi^2) = 1 with mu = mass / length
        scale = 1.0 / np.sqrt(cfg.mass / L * norm2)
        omega = omega1 * (root / roots[0]) ** 2
        modes.append(FlexMode(omega=omega, zeta=float(zetas[i]), beta=beta,
                              sigma_shape=sigma, scale=scale))
    acts = tuple((float(x), float(w)) for x, w in zip(cfg.actuator_positions, cfg.actuator_weights))
    for x, _ in acts:
        if x < 0 or x > L:
            raise InvalidConfigError(f"actuator at {x} outside beam")
    return ModalPlant(mass=cfg.mass, length=L, ts=cfg.ts, flex_modes=tuple(modes),
                      actuator_positions=acts)


def mode_shape(plant, i, x):
    """Mass-normalised free-free eigenfunction of flexible mode ``i`` (1-based)."""
    if not 1 <= i <= plant.n_flex:
        raise OutOfRangeError(f"mode index {i} outside 1..{plant.n_flex}")
    _check_position(plant, x)
    m = plant.flex_modes[i - 1]
    return float(m.scale * _raw_shape(m.beta, m.sigma_shape, x))


@dataclass(frozen=True)
class FrozenPlant:
    """LTI plant at a fixed position as a parallel sum of second-order sections.

    Each section is ``(b, a)`` with coefficients in ascending powers of q^-1.
    """
    sections: tuple
    ts: float
    rho: float = float("nan")

    def transfer_function(self):
        """Collapse the sections into a single ``(b, a)`` pair in q^-1."""
        num, den = np.zeros(1), np.ones(1)
        for b, a in self.sections:
            num = padd(np.convolve(num, a), np.convolve(b, den))
            den = np.convolve(den, a)
        return num, den


def padd(p, r):
    """Add two polynomials given in ascending powers of q^-1."""
    out = np.zeros(max(len(p), len(r)))
    out[:len(p)] += p
    out[:len(r)] += r
    return out


def _rigid_section(plant):
    return np.array([plant.rigid_gain * plant.ts ** 2]), np.array([1.0, -2.0, 1.0])


def _flex_section(mode, gain, ts):
    w, z = mode.omega, mode.zeta
    a = np.array([1.0 + 2 * z * w * ts + (w * ts) ** 2, -(2.0 + 2 * z * w * ts), 1.0])
    return np.array([gain * ts ** 2]), a


def freeze(plant, rho):
    """Frozen LTI dynamics at sensor position ``rho``."""
    _check_position(plant, rho)
    sections = [_rigid_section(plant)]
    for mode, d in zip(plant.flex_modes, plant.modal_gains(rho)):
        sections.append(_flex_section(mode, d, plant.ts))
    return FrozenPlant(sections=tuple(sections), ts=plant.ts, rho=float(rho))


def _eval_q(coeffs, zinv):
    return np.polyval(np.asarray(coeffs)[::-1], zinv)


def frequency_response(frozen, omega):
    """Complex response at angular frequency ``omega`` (rad/s), scalar or array."""
    omega = np.asarray(omega, dtype=float)
    nyquist = np.pi / frozen.ts
    if np.any(omega <= 0) or np.any(omega >= nyquist):
        raise OutOfRangeError(f"frequency must lie in (0, {nyquist}) rad/s")
    zinv = np.exp(-1j * omega * frozen.ts)
    out = sum(_eval_q(b, zinv) / _eval_q(a, zinv) for b, a in frozen.sections)
    return out[()] if out.ndim == 0 else out


def compliance(plant, rho):
    """Low-frequency error per unit acceleration left by ideal mass feedforward."""
    if plant.n_flex == 0:
        _check_position(plant, rho)
        return 0.0
    omegas = np.array([m.omega for m in plant.flex_modes])
    return float(-plant.mass * np.sum(plant.modal_gains(rho) / omegas ** 2))


def analytic_snap(plant, rho):
    """Snap feedforward parameter that cancels the compliance (units kg s^2)."""
    return plant.mass * compliance(plant, rho)


def simulate(frozen, u):
    """Output of the frozen plant for input ``u`` from zero initial conditions."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 1:
        raise InvalidInputError("input must be a non-empty 1-D signal")
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("input contains non-finite samples")
    return sum(signal.lfilter(b, a, u) for b, a in frozen.sections)
