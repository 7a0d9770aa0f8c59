import numpy as np
import pytest

from gpsnap import experiment, lifted, modal, trajectory
from gpsnap.config import ExperimentConfig


@pytest.fixture(scope="session")
def cfg():
    return ExperimentConfig().validate()


@pytest.fixture(scope="session")
def beam(cfg):
    return modal.build_free_free_beam(cfg.beam)


@pytest.fixture(scope="session")
def controller(beam, cfg):
    return lifted.design_lead_controller(modal.freeze(beam, cfg.ilc.nominal_position), cfg.bandwidth_hz)


@pytest.fixture(scope="session")
def traj(cfg):
    return trajectory.plan_fourth_order(cfg.motion.bounds(), cfg.beam.ts, cfg.motion.settle)


@pytest.fixture(scope="session")
def setup(cfg):
    return experiment.build_setup(cfg)


@pytest.fixture(scope="session")
def pipeline(setup, cfg, tmp_path_factory):
    """Full train / fit / evaluate run on the benchmark, shared by several modules."""
    out = tmp_path_factory.mktemp("pipeline")
    training = experiment.cmd_train(setup, str(out))
    model = experiment.cmd_fit(training, cfg.gp, cfg.beam.length, cfg.grid_points, str(out))
    report = experiment.cmd_evaluate(setup, model, training.nominal, str(out))
    return {"out": out, "training": training, "model": model, "report": report}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
