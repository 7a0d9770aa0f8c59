"""Fourth-order (snap-limited) rest-to-rest point-to-point references.

Phase durations follow the time-optimal symmetric recipe: the snap phase
``td``, constant-jerk phase ``tj``, constant-acceleration phase ``ta`` and
constant-velocity phase ``tv`` are maximised in that order. On the sample
grid each duration is rounded up to whole samples and the snap amplitude is
re-solved so that the final position is exact.

The discrete derivative chain is a running sum including the current sample,

    x_n[k] = Ts * sum_{i <= k} x_{n+1}[i],

which is the inverse of the backward difference ``(1 - q^-1) / Ts`` used by
the plant discretisation. The chain is built in integer units so the rest
conditions hold exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import InvalidConfigError, OutOfRangeError

__all__ = [
    "MotionBounds",
    "Trajectory",
    "phase_durations",
    "snap_pattern",
    "plan_fourth_order",
    "resample_derivative",
    "write_csv",
]

DERIVATIVES = ("pos", "vel", "acc", "jerk", "snap")


@dataclass(frozen=True)
class MotionBounds:
    distance: float
    v_max: float
    a_max: float
    j_max: float
    d_max: float

    def validate(self):
        if self.distance < 0 or not np.isfinite(self.distance):
            raise InvalidConfigError(f"distance must be finite and non-negative, got {self.distance}")
        for name in ("v_max", "a_max", "j_max", "d_max"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise InvalidConfigError(f"{name} must be positive, got {v}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    ts: float
    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    jerk: np.ndarray
    snap: np.ndarray

    @property
    def n(self):
        return self.pos.size

    @property
    def t(self):
        return np.arange(self.n) * self.ts

    @property
    def duration(self):
        return (self.n - 1) * self.ts


def phase_durations(bounds):
    """Continuous-time phase durations ``(td, tj, ta, tv)`` of the optimal profile."""
    x, v, a, j, d = bounds.distance, bounds.v_max, bounds.a_max, bounds.j_max, bounds.d_max
    td = min((x / (8 * d)) ** 0.25, (v / (2 * d)) ** (1 / 3), (a / d) ** 0.5, j / d)

    # peak velocity and displacement with ta = tv = 0, as functions of tj
    vel_tj = lambda tj: d * td * (td + tj) * (2 * td + tj)
    dist_tj = lambda tj: vel_tj(tj) * (4 * td + 2 * tj)
    tj_cands = [max(a / (d * td) - td, 0.0)]
    for fn, bound in ((vel_tj, v), (dist_tj, x)):
        tj_cands.append(_monotone_root(lambda t: fn(t) - bound))
    tj = max(min(tj_cands), 0.0)

    acc = d * td * (td + tj)
    ta_v = v / acc - 2 * td - tj
    # x = acc * (2td + tj + ta) * (4td + 2tj + ta): quadratic in ta
    p, q = 2 * td + tj, 4 * td + 2 * tj
    ta_x = (-(p + q) + np.sqrt((p - q) ** 2 + 4 * x / acc)) / 2
    ta = max(min(ta_v, ta_x), 0.0)

    vel = acc * (2 * td + tj + ta)
    tv = max(x / vel - (4 * td + 2 * tj + ta), 0.0)
    return td, tj, ta, tv


def _monotone_root(fn):
    """Root of an increasing function on [0, inf), or 0 when fn(0) >= 0."""
    if fn(0.0) >= 0:
        return 0.0
    hi = 1.0
    while fn(hi) < 0:
        hi *= 2
    return optimize.brentq(fn, 0.0, hi, xtol=1e-15, rtol=1e-15)


def snap_pattern(nd, nj, na, nv):
    """Unit snap sequence (+1/-1/0) of the symmetric 15-phase profile.

    A leading and a trailing zero sample carry the rest conditions.
    """
    half = ([1] * nd + [0] * nj + [-1] * nd + [0] * na
            + [-1] * nd + [0] * nj + [1] * nd)
    body = half + [0] * nv + [-s for s in half]
    return np.array([0] + body + [0], dtype=object)


def _integrate_exact(unit_snap):
    chain = [unit_snap]
    for _ in range(4):
        chain.append(np.cumsum(chain[-1]))
    return chain[::-1]  # pos, vel, acc, jerk, snap in integer units


def _peaks(chain):
    return [max(abs(int(v)) for v in c) if len(c) else 0 for c in chain]


def plan_fourth_order(bounds, ts, settle=0.0):
    """Plan a rest-to-rest move; ``settle`` seconds of rest are appended."""
    bounds.validate()
    if not ts > 0:
        raise InvalidConfigError(f"sampling time must be positive, got {ts}")
    if settle < 0:
        raise InvalidConfigError("settle time must be non-negative")
    n_settle = int(np.ceil(settle / ts - 1e-9))
    if bounds.distance == 0:
        z = np.zeros(1 + n_settle)
        return Trajectory(ts, z, z.copy(), z.copy(), z.copy(), z.copy())

    td, tj, ta, tv = phase_durations(bounds)
    nd = max(int(np.ceil(td / ts - 1e-9)), 1)
    nj, na, nv = (int(np.ceil(t / ts - 1e-9)) for t in (tj, ta, tv))

    limits = np.array([bounds.v_max, bounds.a_max, bounds.j_max, bounds.d_max])
    scale = np.array([ts ** 3, ts ** 2, ts, 1.0])
    while True:
        chain = _integrate_exact(snap_pattern(nd, nj, na, nv))
        travel = int(chain[0][-1])
        amp = bounds.distance / (travel * ts ** 4)
        peaks = np.array(_peaks(chain[1:]), dtype=float) * scale * amp
        if np.all(peaks <= limits * (1 + 1e-12)):
            break
        # stretching the cruise lowers every peak without touching the shape
        vel_unit = _peaks(chain[1:2])[0]
        need = bounds.distance * np.max(peaks / limits) / (amp * ts ** 4)
        nv += max(1, int(np.ceil((need - travel) / vel_unit)))

    out = []
    for order, c in enumerate(chain):
        arr = np.array([float(v) for v in c]) * (amp * ts ** (4 - order))
        out.append(np.concatenate([arr, np.full(n_settle, arr[-1] if order == 0 else 0.0)]))
    return Trajectory(ts, *out)


def resample_derivative(traj, order):
    """Stored derivative of the given order (0 = position, 4 = snap)."""
    if order not in range(5):
        raise OutOfRangeError(f"derivative order must be 0..4, got {order}")
    return getattr(traj, DERIVATIVES[order])


def write_csv(traj, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t", *DERIVATIVES])
        for k in range(traj.n):
            w.writerow([k, f"{k * traj.ts:.17g}",
                        *(f"{getattr(traj, name)[k]:.17g}" for name in DERIVATIVES)])
