import csv

import numpy as np
import pytest

from gpsnap import ilc, lifted, modal
from gpsnap.errors import InvalidConfigError, InvalidInputError, RankDeficiencyError
from gpsnap.ilc import BasisMatrix, IlcSession, IlcWeights
from gpsnap.lifted import LiftedLti


def identity(n):
    return LiftedLti(np.eye(n)[0])


def test_mean_error_gain_example():
    n = 8
    basis = BasisMatrix(np.ones((n, 1)), ("one",))
    l_gain, q_gain = ilc.compute_gains(identity(n), basis, IlcWeights())
    np.testing.assert_allclose(l_gain, np.full((1, n), 1.0 / n), rtol=1e-14)
    np.testing.assert_allclose(q_gain, [[1.0]], rtol=1e-14)


def test_heavy_feedforward_weight_freezes_learning():
    n = 8
    basis = BasisMatrix(np.ones((n, 1)), ("one",))
    l_gain, q_gain = ilc.compute_gains(identity(n), basis, IlcWeights(w_f=1e12))
    assert np.max(np.abs(l_gain)) < 1e-12 and np.max(np.abs(q_gain)) < 1e-11


def test_gains_match_dense_formula(rng):
    n = 60
    h = rng.standard_normal(n) * np.exp(-np.arange(n) / 10)
    psi = rng.standard_normal((n, 3))
    w = IlcWeights(w_e=rng.uniform(0.5, 2, n), w_f=0.3, w_df=rng.uniform(0, 1, n))
    l_gain, q_gain = ilc.compute_gains(LiftedLti(h), BasisMatrix(psi, ("a", "b", "c")), w)
    gs = lifted.toeplitz(h)
    we, wf, wdf = np.diag(w.w_e), 0.3 * np.eye(n), np.diag(w.w_df)
    j = gs @ psi
    r = j.T @ we @ j + psi.T @ (wf + wdf) @ psi
    np.testing.assert_allclose(l_gain, np.linalg.inv(r) @ j.T @ we, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(q_gain, np.linalg.inv(r) @ (j.T @ we @ j + psi.T @ wdf @ psi),
                               rtol=1e-9, atol=1e-12)


def test_gains_depend_only_on_basis_image(rng):
    # an impulse in the last sample only sees h[0], so the tails of h are irrelevant
    n = 20
    psi = np.zeros((n, 1))
    psi[-1, 0] = 1.0
    basis = BasisMatrix(psi, ("impulse",))
    h1, h2 = rng.standard_normal(n), rng.standard_normal(n)
    h2[0] = h1[0]
    a = ilc.compute_gains(LiftedLti(h1), basis, IlcWeights(w_f=0.1))
    b = ilc.compute_gains(LiftedLti(h2), basis, IlcWeights(w_f=0.1))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_duplicate_basis_column_rejected():
    n = 10
    basis = BasisMatrix(np.column_stack([np.arange(n), np.arange(n)]).astype(float), ("acc", "acc2"))
    with pytest.raises(RankDeficiencyError, match="acc"):
        ilc.compute_gains(identity(n), basis, IlcWeights())


def test_zero_basis_column_rejected():
    n = 10
    basis = BasisMatrix(np.column_stack([np.ones(n), np.zeros(n)]), ("acc", "snap"))
    with pytest.raises(RankDeficiencyError, match="snap"):
        ilc.compute_gains(identity(n), basis, IlcWeights())


def test_invalid_weights_rejected():
    with pytest.raises(InvalidConfigError):
        IlcWeights(w_e=0.0)
    with pytest.raises(InvalidConfigError):
        IlcWeights(w_f=-1.0)


@pytest.fixture(scope="module")
def exact_model(beam, controller, traj):
    rho = 0.13
    frozen = modal.freeze(beam, rho)
    sens = lifted.sensitivity_lifted(frozen, controller, traj.n)
    gs = lifted.process_lifted(frozen, controller, traj.n, sens)
    basis = ilc.build_basis(traj)
    j = np.column_stack([lifted.apply(gs, col) for col in basis.psi.T])
    return {"frozen": frozen, "sens": sens, "gs": gs, "basis": basis, "j": j,
            "sr": lifted.apply(sens, traj.pos)}


def test_update_minimises_criterion_against_random_probes(exact_model, rng):
    m = exact_model
    w = IlcWeights()
    l_gain, q_gain = ilc.compute_gains(m["gs"], m["basis"], w)
    theta = np.array([0.7, 1e-5])
    e = m["sr"] - m["j"] @ theta
    theta1 = l_gain @ e + q_gain @ theta

    def cost(t):
        e_next = e - m["j"] @ (t - theta)
        return float(e_next @ e_next)

    v1 = cost(theta1)
    assert ilc.criterion(theta1, theta, e, m["gs"], m["basis"], w) == pytest.approx(v1, rel=1e-9)
    scale = np.abs(theta1) + 1e-12
    for _ in range(1000):
        probe = theta1 + scale * rng.standard_normal(2) * 10.0 ** rng.uniform(-8, 0)
        assert v1 <= cost(probe) * (1 + 1e-12)


def test_exact_model_converges_in_one_step(exact_model, traj):
    m = exact_model
    basis = m["basis"]
    l_gain, q_gain = ilc.compute_gains(m["gs"], basis, IlcWeights())
    session = IlcSession(basis, l_gain, q_gain)
    thetas = []
    for _ in range(4):
        e = m["sr"] - m["j"] @ session.theta
        thetas.append(ilc.ilc_step(session, e).copy())
    for t in thetas[1:]:
        np.testing.assert_allclose(t, thetas[0], rtol=1e-6)
    norms = [r.norm_e for r in session.history]
    assert norms[1] < 1e-2 * norms[0]
    assert norms[2] == pytest.approx(norms[1], rel=1e-6)


@pytest.mark.parametrize("rho", [0.01, 0.13, 0.25, 0.37, 0.49])
def test_feedforward_contracts_towards_fixed_point(beam, controller, traj, cfg, rho):
    session = ilc.run_ilc(beam, rho, cfg.ilc.nominal_position, controller, traj, None, 6)
    frozen = modal.freeze(beam, rho)
    sens = lifted.sensitivity_lifted(frozen, controller, traj.n)
    gs = lifted.process_lifted(frozen, controller, traj.n, sens)
    psi = session.basis.psi
    j_true = np.column_stack([lifted.apply(gs, col) for col in psi.T])
    l_gain, q_gain = session.l_gain, session.q_gain
    a = np.eye(psi.shape[1]) - q_gain + l_gain @ j_true
    theta_inf = np.linalg.solve(a, l_gain @ lifted.apply(sens, traj.pos))
    f_inf = psi @ theta_inf
    dist = [np.linalg.norm(psi @ np.array(r.theta) - f_inf) for r in session.history]
    dist.append(np.linalg.norm(session.feedforward - f_inf))
    for d0, d1 in zip(dist[:-1], dist[1:]):
        assert d1 <= d0 + 1e-9
    # learned mass close to the true mass at every position
    assert session.theta[0] == pytest.approx(beam.mass, rel=0.02)


def test_ilc_step_rejects_bad_error(exact_model):
    m = exact_model
    l_gain, q_gain = ilc.compute_gains(m["gs"], m["basis"], IlcWeights())
    session = IlcSession(m["basis"], l_gain, q_gain)
    with pytest.raises(InvalidInputError):
        ilc.ilc_step(session, np.zeros(3))
    bad = np.zeros(m["basis"].psi.shape[0])
    bad[4] = np.inf
    with pytest.raises(InvalidInputError):
        ilc.ilc_step(session, bad)


def test_zero_trials_rejected(beam, controller, traj):
    with pytest.raises(InvalidConfigError):
        ilc.run_ilc(beam, 0.25, 0.25, controller, traj, None, 0)


def test_history_csv(tmp_path, beam, controller, traj):
    session = ilc.run_ilc(beam, 0.25, 0.25, controller, traj, None, 3)
    path = tmp_path / "h.csv"
    ilc.write_history_csv(session, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["trial", "norm_e", "norm_f", "theta_acc", "theta_snap"]
    assert [int(r[0]) for r in rows[1:]] == [1, 2, 3]
    assert float(rows[1][4]) == 0.0  # first trial runs with zero feedforward
    assert float(rows[2][1]) == session.history[1].norm_e
