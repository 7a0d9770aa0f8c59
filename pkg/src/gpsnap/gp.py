"""Zero-mean Gaussian-process regression with a squared-exponential kernel.

The kernel is ``k(p, p') = sigma_f2 * exp(-|p - p'|^2 / (2 * length_scale^2))``.
Some texts write the exponent as ``-(p - p')^T l (p - p') / 2`` with a
precision ``l``; the two agree for ``l = 1 / length_scale^2``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .errors import FitFailureError, IllConditionedKernelError, InvalidInputError

__all__ = [
    "Hyperparameters",
    "TrainingSet",
    "GpModel",
    "FitStrategy",
    "rbf_kernel",
    "kernel_matrix",
    "fit_model",
    "posterior",
    "log_marginal_likelihood",
    "fit_hyperparameters",
    "estimate_delta",
    "dumps",
    "loads",
    "save",
    "load",
]

JITTER = 1e-10  # relative to sigma_f2, always added to the diagonal
FORMAT_NAME = "gpsnap-gp-model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Hyperparameters:
    sigma_f2: float
    length_scale: float
    sigma_n2: float

    def __post_init__(self):
        for name in ("sigma_f2", "length_scale", "sigma_n2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be positive and finite, got {v}")

    @property
    def precision(self):
        return 1.0 / self.length_scale ** 2


@dataclass(frozen=True, eq=False)
class TrainingSet:
    p: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if p.shape[0] != y.size:
            raise InvalidInputError(f"{p.shape[0]} inputs but {y.size} targets")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(y))):
            raise InvalidInputError("training data must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.y.size


def _as_points(p):
    p = np.asarray(p, dtype=float)
    return p[:, None] if p.ndim <= 1 else p


def rbf_kernel(rho, rho_p, hyp):
    d = np.atleast_1d(np.asarray(rho, dtype=float) - np.asarray(rho_p, dtype=float))
    return float(hyp.sigma_f2 * np.exp(-0.5 * np.dot(d, d) / hyp.length_scale ** 2))


def kernel_matrix(pa, pb, hyp):
    a = _as_points(np.atleast_1d(pa))
    b = _as_points(np.atleast_1d(pb))
    sq = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)
    return hyp.sigma_f2 * np.exp(-0.5 * sq / hyp.length_scale ** 2)


def _factor(hyp, p):
    k = kernel_matrix(p, p, hyp)
    k[np.diag_indices_from(k)] += hyp.sigma_n2 + JITTER * hyp.sigma_f2
    try:
        return linalg.cho_factor(k, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise IllConditionedKernelError(
            f"kernel matrix not positive definite for {hyp}; increase sigma_n2 or jitter") from exc


@dataclass(frozen=True, eq=False)
class GpModel:
    hyp: Hyperparameters
    train: TrainingSet
    chol: tuple = field(repr=False)
    alpha: np.ndarray = field(repr=False)

    @property
    def noise(self):
        """Diagonal term actually used: sigma_n2 plus jitter."""
        return self.hyp.sigma_n2 + JITTER * self.hyp.sigma_f2


def fit_model(hyp, train):
    """Factorise ``K + sigma_n2 I`` once for repeated posterior queries."""
    chol = _factor(hyp, train.p)
    alpha = linalg.cho_solve(chol, train.y)
    return GpModel(hyp=hyp, train=train, chol=chol, alpha=alpha)


def posterior(model, p_star):
    """Posterior mean vector and covariance matrix at ``p_star``."""
    p_star = np.atleast_1d(np.asarray(p_star, dtype=float))
    if not np.all(np.isfinite(p_star)):
        raise InvalidInputError("query positions must be finite")
    k_star = kernel_matrix(model.train.p, p_star, model.hyp)
    mean = k_star.T @ model.alpha
    v = linalg.cho_solve(model.chol, k_star)
    cov = kernel_matrix(p_star, p_star, model.hyp) - k_star.T @ v
    d = np.diag(cov).copy()
    if np.any(d < -1e-12 * model.hyp.sigma_f2):
        raise IllConditionedKernelError(f"negative posterior variance {d.min()}")
    cov[np.diag_indices_from(cov)] = np.maximum(d, 0.0)
    return mean, cov


def estimate_delta(model, rho_star):
    """Posterior mean at a single position."""
    mean, _ = posterior(model, [rho_star])
    return float(mean[0])


def log_marginal_likelihood(hyp, train):
    chol = _factor(hyp, train.p)
    alpha = linalg.cho_solve(chol, train.y)
    return float(-0.5 * train.y @ alpha
                 - np.sum(np.log(np.diag(chol[0])))
                 - 0.5 * train.n * np.log(2 * np.pi))


@dataclass(frozen=True)
class FitStrategy:
    n_starts: int = 16
    max_evals: int = 500
    seed: int = 0
    # search box in log space, relative to the data scale
    log_sf2_span: tuple = (-6.0, 6.0)
    log_ls_span: tuple = (-3.0, 2.0)
    noise_floor: float = 1e-12


def _search_box(train, strategy):
    var = float(np.var(train.y))
    if var <= 0:
        var = float(np.mean(train.y ** 2)) or 1.0
    p = _as_points(train.p)
    span = float(np.max(np.ptp(p, axis=0))) or 1.0
    lo = np.array([np.log(var) + strategy.log_sf2_span[0] * np.log(10),
                   np.log(span) + strategy.log_ls_span[0] * np.log(10),
                   np.log(var * strategy.noise_floor)])
    hi = np.array([np.log(var) + strategy.log_sf2_span[1] * np.log(10),
                   np.log(span) + strategy.log_ls_span[1] * np.log(10),
                   np.log(var)])
    return lo, hi


def fit_hyperparameters(train, strategy=None):
    """Maximise the log marginal likelihood from several seeded starts.

    Each start runs a bounded Nelder-Mead search in log-hyperparameter space;
    the best final point wins, ties going to the lower start index.
    """
    strategy = FitStrategy() if strategy is None else strategy
    if train.n < 2:
        raise FitFailureError("at least two training points are needed to fit hyperparameters")
    lo, hi = _search_box(train, strategy)

    def to_hyp(z):
        z = np.clip(z, lo, hi)
        return Hyperparameters(*(float(v) for v in np.exp(z)))

    def objective(z):
        try:
            return -log_marginal_likelihood(to_hyp(z), train)
        except (IllConditionedKernelError, InvalidInputError):
            return np.inf

    rng = np.random.default_rng(strategy.seed)
    # first start sits mid-box, the rest are uniform draws
    starts = [0.5 * (lo + hi)] + [rng.uniform(lo, hi) for _ in range(strategy.n_starts - 1)]
    best_val, best_z = np.inf, None
    for z0 in starts:
        f0 = objective(z0)
        res = optimize.minimize(objective, z0, method="Nelder-Mead",
                                options={"maxfev": strategy.max_evals, "xatol": 1e-8,
                                         "fatol": 1e-12})
        z, val = (res.x, res.fun) if res.fun <= f0 else (z0, f0)
        if val < best_val:
            best_val, best_z = val, np.clip(z, lo, hi)
    if best_z is None or not np.isfinite(best_val):
        raise FitFailureError("every start failed to factorise the kernel matrix")
    return to_hyp(best_z)


def dumps(model):
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kernel": "rbf",
        "mean": "zero",
        "jitter": JITTER,
        "hyperparameters": {
            "sigma_f2": model.hyp.sigma_f2,
            "length_scale": model.hyp.length_scale,
            "sigma_n2": model.hyp.sigma_n2,
        },
        "training": {"p": model.train.p.tolist(), "y": model.train.y.tolist()},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def loads(text):
    doc = json.loads(text)
    if doc.get("format") != FORMAT_NAME:
        raise InvalidInputError(f"not a GP model document: format={doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise InvalidInputError(f"unsupported model version {doc.get('version')}")
    h = doc["hyperparameters"]
    hyp = Hyperparameters(float(h["sigma_f2"]), float(h["length_scale"]), float(h["sigma_n2"]))
    train = TrainingSet(np.array(doc["training"]["p"], dtype=float),
                        np.array(doc["training"]["y"], dtype=float))
    return fit_model(hyp, train)


def save(model, path):
    with open(path, "w") as fh:
        fh.write(dumps(model))


def load(path):
    with open(path) as fh:
        return loads(fh.read())
