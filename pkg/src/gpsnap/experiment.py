"""The flexible-beam experiment: ILC training, GP fit, feedforward comparison.

Every command writes CSV files with 17 significant digits so repeated runs
can be compared byte for byte.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gp, ilc, lifted, modal, trajectory
from .errors import FitFailureError, GpSnapError

log = logging.getLogger(__name__)

__all__ = [
    "Setup",
    "TrainingResult",
    "ComparisonReport",
    "build_setup",
    "cmd_train",
    "cmd_fit",
    "cmd_evaluate",
    "cmd_bode",
    "cmd_plan",
    "read_training",
]

TRAINING_FILE = "training.csv"
NOMINAL_FILE = "nominal.csv"
MODEL_FILE = "gp_model.json"


def _fmt(x):
    return f"{x:.17g}"


def _write_rows(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) if isinstance(v, float)
                              else str(v) for v in row) + "\n")


def _mm(rho):
    return f"{rho * 1000:07.3f}mm"


@dataclass(frozen=True, eq=False)
class Setup:
    """Plant, controller and reference shared by all commands."""
    cfg: object
    plant: modal.ModalPlant
    controller: lifted.Controller
    traj: trajectory.Trajectory


def build_setup(cfg):
    plant = modal.build_free_free_beam(cfg.beam)
    nominal = modal.freeze(plant, cfg.ilc.nominal_position)
    c = lifted.design_lead_controller(nominal, cfg.bandwidth_hz)
    traj = trajectory.plan_fourth_order(cfg.motion.bounds(), cfg.beam.ts, cfg.motion.settle)
    return Setup(cfg, plant, c, traj)


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))  # map preserves input order


@dataclass(eq=False)
class TrainingResult:
    positions: np.ndarray
    delta: np.ndarray
    mass: np.ndarray
    nominal: tuple  # (rho, mass, delta) at the model position
    sessions: list = field(default_factory=list, repr=False)
    accel_only: object = field(default=None, repr=False)


def _session(setup, rho, orders=(2, 4)):
    cfg = setup.cfg
    return ilc.run_ilc(setup.plant, rho, cfg.ilc.nominal_position, setup.controller,
                       setup.traj, None, cfg.ilc.trials, orders=orders,
                       w_f_rel=cfg.ilc.w_f_rel, w_e=cfg.ilc.w_e, w_df=cfg.ilc.w_df)


def cmd_train(setup, out_dir=None):
    """ILC at every training position with the model frozen at the nominal position."""
    cfg = setup.cfg
    positions = list(cfg.training_positions)
    nominal_rho = cfg.ilc.nominal_position

    def job(rho):
        try:
            return _session(setup, rho)
        except GpSnapError as exc:
            raise type(exc)(f"training failed at rho={rho}: {exc}") from exc

    sessions = _map(job, positions, cfg.workers)
    if nominal_rho in positions:
        nominal_session = sessions[positions.index(nominal_rho)]
    else:
        nominal_session = job(nominal_rho)
    accel_only = _session(setup, nominal_rho, orders=(2,))

    thetas = np.array([s.theta for s in sessions])
    result = TrainingResult(
        positions=np.array(positions, dtype=float),
        delta=thetas[:, 1].copy(),
        mass=thetas[:, 0].copy(),
        nominal=(float(nominal_rho), float(nominal_session.theta[0]), float(nominal_session.theta[1])),
        sessions=sessions,
        accel_only=accel_only,
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_rows(os.path.join(out_dir, TRAINING_FILE), ["rho", "delta", "mass"],
                    [(float(r), float(d), float(m))
                     for r, d, m in zip(result.positions, result.delta, result.mass)])
        _write_rows(os.path.join(out_dir, NOMINAL_FILE), ["rho", "delta", "mass"],
                    [(result.nominal[0], result.nominal[2], result.nominal[1])])
        for rho, s in zip(positions, sessions):
            ilc.write_history_csv(s, os.path.join(out_dir, f"ilc_{_mm(rho)}.csv"))
        ilc.write_history_csv(nominal_session, os.path.join(out_dir, "ilc_nominal_acc_snap.csv"))
        ilc.write_history_csv(accel_only, os.path.join(out_dir, "ilc_nominal_acc.csv"))
    return result


def _read_table(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def read_training(out_dir):
    rho, delta, mass = _read_table(os.path.join(out_dir, TRAINING_FILE))
    n_rho, n_delta, n_mass = _read_table(os.path.join(out_dir, NOMINAL_FILE))
    return TrainingResult(rho, delta, mass, (float(n_rho[0]), float(n_mass[0]), float(n_delta[0])))


def cmd_fit(training, strategy, length, grid_points=201, out_dir=None):
    """Fit the GP to the learned snap parameters and tabulate its posterior."""
    if training.positions.size < 2:
        raise FitFailureError("GP fitting needs at least two training positions")
    train = gp.TrainingSet(training.positions, training.delta)
    hyp = gp.fit_hyperparameters(train, strategy)
    model = gp.fit_model(hyp, train)
    grid = np.linspace(0.0, length, grid_points)
    mean, cov = gp.posterior(model, grid)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        gp.save(model, os.path.join(out_dir, MODEL_FILE))
        _write_rows(os.path.join(out_dir, "gp_posterior.csv"), ["rho", "mean", "var"],
                    [(float(r), float(m), float(v)) for r, m, v in zip(grid, mean, np.diag(cov))])
    return model


@dataclass(eq=False)
class ComparisonReport:
    positions: list
    rows: list  # one dict per position
    traces: dict = field(default_factory=dict, repr=False)

    VARIANTS = ("gp", "independent", "acc")

    def row(self, rho):
        for r in self.rows:
            if r["rho"] == rho:
                return r
        raise KeyError(rho)


def cmd_evaluate(setup, model, nominal, out_dir=None):
    """Closed-loop errors for GP snap, position-independent snap and acceleration-only feedforward.

    ``nominal`` is ``(rho, mass, delta)`` learned at the model position; its
    mass is shared by all three variants.
    """
    cfg = setup.cfg
    _, m_hat, delta_nominal = nominal
    traj = setup.traj
    lo, hi = float(np.min(model.train.p)), float(np.max(model.train.p))

    def job(rho):
        delta_gp = gp.estimate_delta(model, rho)
        row = {"rho": float(rho), "delta_gp": delta_gp, "delta_independent": delta_nominal,
               "status": "ok"}
        if not lo <= rho <= hi:
            log.warning("test position %.4f m outside training hull [%.4f, %.4f]: "
                        "GP reverts toward its zero prior mean", rho, lo, hi)
            row["status"] = "extrapolated"
        try:
            frozen = modal.freeze(setup.plant, rho)
            sens = lifted.sensitivity_lifted(frozen, setup.controller, traj.n)
            errors = {}
            for name, d in (("gp", delta_gp), ("independent", delta_nominal), ("acc", 0.0)):
                f = m_hat * traj.acc + d * traj.snap
                errors[name] = lifted.closed_loop_error(frozen, setup.controller, traj, f, sens)
        except GpSnapError as exc:
            log.error("evaluation failed at rho=%s: %s", rho, exc)
            row["status"] = f"failed:{type(exc).__name__}"
            for name in ComparisonReport.VARIANTS:
                row[f"norm_{name}"] = float("nan")
                row[f"max_{name}"] = float("nan")
            return row, None
        for name, e in errors.items():
            row[f"norm_{name}"] = float(np.linalg.norm(e))
            row[f"max_{name}"] = float(np.max(np.abs(e)))
        return row, errors

    results = _map(job, list(cfg.test_positions), cfg.workers)
    report = ComparisonReport(list(cfg.test_positions), [r for r, _ in results])
    for rho, (_, errors) in zip(cfg.test_positions, results):
        if errors is not None:
            report.traces[rho] = errors
    trace_rho = cfg.trace_position
    if trace_rho not in report.traces:
        _, errors = job(trace_rho)
        if errors is not None:
            report.traces[trace_rho] = errors

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        cols = ["rho", "delta_gp", "delta_independent",
                "norm_gp", "norm_independent", "norm_acc", "max_gp", "max_independent", "max_acc",
                "status"]
        _write_rows(os.path.join(out_dir, "comparison.csv"), cols,
                    [[r[c] for c in cols] for r in report.rows])
        if trace_rho in report.traces:
            tr = report.traces[trace_rho]
            _write_rows(os.path.join(out_dir, f"error_trace_{_mm(trace_rho)}.csv"),
                        ["k", "t", "e_gp", "e_independent", "e_acc"],
                        [(k, k * traj.ts, float(tr["gp"][k]), float(tr["independent"][k]),
                          float(tr["acc"][k])) for k in range(traj.n)])
    return report


def cmd_bode(plant, positions, n_freq=400, out_dir=None, f_min=0.1):
    """Magnitude and phase of the frozen plant on a log grid for each position."""
    f_max = 0.45 / plant.ts
    freqs = np.geomspace(f_min, f_max, n_freq)
    rows = []
    for rho in positions:
        resp = modal.frequency_response(modal.freeze(plant, rho), 2 * np.pi * freqs)
        for f, h in zip(freqs, resp):
            rows.append((float(rho), float(f), float(abs(h)), float(np.degrees(np.angle(h)))))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_rows(os.path.join(out_dir, "bode.csv"), ["rho", "freq_hz", "magnitude", "phase_deg"], rows)
    return rows


def cmd_plan(cfg, out_dir=None):
    traj = trajectory.plan_fourth_order(cfg.motion.bounds(), cfg.beam.ts, cfg.motion.settle)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        trajectory.write_csv(traj, os.path.join(out_dir, "trajectory.csv"))
    return traj
