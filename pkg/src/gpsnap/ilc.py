"""Iterative learning control with basis functions.

The feedforward is ``f = Psi @ theta`` with basis columns taken from the
reference derivatives. Each trial minimises

    V(theta') = w_e |e'|^2 + w_f |f'|^2 + w_df |f' - f|^2

with the predicted error ``e' = e - (G S)(f' - f)`` of a nominal model, which
gives the linear update ``theta' = L e + Q theta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lifted
from .errors import DivergenceError, InvalidConfigError, InvalidInputError, RankDeficiencyError
from .modal import freeze
from .trajectory import DERIVATIVES, resample_derivative

__all__ = [
    "BasisMatrix",
    "IlcWeights",
    "IlcSession",
    "TrialRecord",
    "build_basis",
    "compute_gains",
    "criterion",
    "default_weights",
    "ilc_step",
    "run_ilc",
    "write_history_csv",
]

DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True, eq=False)
class BasisMatrix:
    psi: np.ndarray
    names: tuple = ("acc", "snap")

    @property
    def n_theta(self):
        return self.psi.shape[1]


@dataclass(frozen=True)
class IlcWeights:
    """Scalar weights: W_e = w_e I, W_f = w_f I, W_df = w_df I.

    Per-sample diagonal weights may be passed as arrays instead of scalars.
    """
    w_e: object = 1.0
    w_f: object = 0.0
    w_df: object = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.w_e) <= 0):
            raise InvalidConfigError("w_e must be strictly positive")
        if np.any(np.asarray(self.w_f) < 0) or np.any(np.asarray(self.w_df) < 0):
            raise InvalidConfigError("w_f and w_df must be non-negative")


def build_basis(traj, orders=(2, 4)):
    """Basis columns from stored reference derivatives (default acc and snap)."""
    cols = [resample_derivative(traj, k) for k in orders]
    return BasisMatrix(np.column_stack(cols), tuple(DERIVATIVES[k] for k in orders))


def _weighted(w, x):
    w = np.asarray(w, dtype=float)
    if w.ndim == 1 and x.ndim == 2:
        return w[:, None] * x
    return w * x


def compute_gains(gs, basis, w):
    """Learning gains ``(L, Q)`` for the nominal ``G S`` operator."""
    psi = basis.psi
    j = np.column_stack([lifted.apply(gs, col) for col in psi.T])  # (G S) Psi, N x n_theta
    jw = _weighted(w.w_e, j)
    tracking = j.T @ jw
    r = tracking + psi.T @ _weighted(w.w_f, psi) + psi.T @ _weighted(w.w_df, psi)
    # a near-zero pivot shows up as a tiny singular value of the scaled R
    scale = np.sqrt(np.abs(np.diag(r)))
    if np.any(scale == 0):
        bad = basis.names[int(np.flatnonzero(scale == 0)[0])]
        raise RankDeficiencyError(f"basis column '{bad}' contributes nothing to the criterion")
    rs = r / np.outer(scale, scale)
    sv = np.linalg.svd(rs, compute_uv=False)
    if sv[-1] < 1e-13 * sv[0]:
        _, _, vt = np.linalg.svd(rs)
        bad = basis.names[int(np.argmax(np.abs(vt[-1])))]
        raise RankDeficiencyError(f"criterion is rank deficient along basis column '{bad}'")
    l_gain = np.linalg.solve(r, jw.T)
    q_gain = np.linalg.solve(r, tracking + psi.T @ _weighted(w.w_df, psi))
    return l_gain, q_gain


def criterion(theta_next, theta, e, gs, basis, w):
    """Predicted cost of moving from ``theta`` (error ``e``) to ``theta_next``."""
    psi = basis.psi
    f_next, f = psi @ theta_next, psi @ theta
    e_next = e - lifted.apply(gs, f_next - f)
    return float(np.sum(_weighted(w.w_e, e_next) * e_next)
                 + np.sum(_weighted(w.w_f, f_next) * f_next)
                 + np.sum(_weighted(w.w_df, f_next - f) * (f_next - f)))


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    theta: tuple
    norm_e: float
    norm_f: float


@dataclass(eq=False)
class IlcSession:
    basis: BasisMatrix
    l_gain: np.ndarray
    q_gain: np.ndarray
    theta: np.ndarray = None
    history: list = field(default_factory=list)
    errors: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.theta is None:
            self.theta = np.zeros(self.basis.n_theta)
        self.theta = np.asarray(self.theta, dtype=float)

    @property
    def trial(self):
        return len(self.history)

    @property
    def feedforward(self):
        return self.basis.psi @ self.theta

    def record(self, e):
        self.history.append(TrialRecord(self.trial + 1, tuple(self.theta.tolist()),
                                        float(np.linalg.norm(e)),
                                        float(np.linalg.norm(self.feedforward))))
        self.errors.append(np.asarray(e))


def ilc_step(session, e_j):
    """Record trial ``j`` with error ``e_j`` and move to ``theta_{j+1}``."""
    e_j = np.asarray(e_j, dtype=float)
    if e_j.shape != (session.basis.psi.shape[0],):
        raise InvalidInputError("error signal length does not match the basis")
    if not np.all(np.isfinite(e_j)):
        raise InvalidInputError("error signal contains non-finite samples")
    session.record(e_j)
    session.theta = session.l_gain @ e_j + session.q_gain @ session.theta
    return session.theta


def run_ilc(plant, rho, model_rho, c, traj, w, trials, orders=(2, 4), theta0=None,
            w_f_rel=1e-8, w_e=1.0, w_df=0.0):
    """Learn feedforward parameters on the plant frozen at ``rho``.

    Gains come from the plant frozen at ``model_rho``; trials run on the
    plant frozen at ``rho``. ``trials`` error signals are recorded. With
    ``w=None`` the weights come from :func:`default_weights` on the model.
    """
    if trials < 1:
        raise InvalidConfigError("at least one trial is required")
    n = traj.n
    true = freeze(plant, rho)
    sens = lifted.sensitivity_lifted(true, c, n)
    gs_true = lifted.process_lifted(true, c, n, sens)
    if model_rho == rho:
        gs_model = gs_true
    else:
        gs_model = lifted.process_lifted(freeze(plant, model_rho), c, n)
    basis = build_basis(traj, orders)
    if w is None:
        w = default_weights(gs_model, basis, w_f_rel, w_df=w_df, w_e=w_e)
    l_gain, q_gain = compute_gains(gs_model, basis, w)
    session = IlcSession(basis, l_gain, q_gain, theta0)
    sr = lifted.apply(sens, traj.pos)
    ref_norm = None
    for j in range(trials):
        e = sr - lifted.apply(gs_true, session.feedforward)
        if not np.all(np.isfinite(e)) or np.max(np.abs(e)) > lifted.OVERFLOW_GUARD:
            raise DivergenceError(f"error diverged in trial {j + 1} at rho={rho}", trial=j + 1)
        theta = ilc_step(session, e)
        norm = np.linalg.norm(theta)
        if j == 0:
            ref_norm = norm
        if not np.all(np.isfinite(theta)) or (ref_norm > 0 and norm > DIVERGENCE_FACTOR * ref_norm):
            raise DivergenceError(f"parameters diverged after trial {j + 1} at rho={rho}", trial=j + 1)
    return session


def default_weights(gs, basis, w_f_rel=1e-8, w_df=0.0, w_e=1.0):
    """Weights with ``w_f`` scaled to the size of ``(G S) Psi`` relative to ``Psi``."""
    j = np.column_stack([lifted.apply(gs, col) for col in basis.psi.T])
    w_f = w_f_rel * w_e * np.linalg.norm(j, 2) ** 2 / np.linalg.norm(basis.psi, 2) ** 2
    return IlcWeights(w_e=float(w_e), w_f=float(w_f), w_df=float(w_df))


def write_history_csv(session, path):
    names = session.basis.names
    with open(path, "w") as fh:
        fh.write("trial,norm_e,norm_f," + ",".join(f"theta_{n}" for n in names) + "\n")
        for rec in session.history:
            fh.write(",".join([str(rec.trial), f"{rec.norm_e:.17g}", f"{rec.norm_f:.17g}",
                               *(f"{t:.17g}" for t in rec.theta)]) + "\n")
