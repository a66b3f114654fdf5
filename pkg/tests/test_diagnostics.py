import numpy as np
import pytest

import sspg
from conftest import make_contraction, make_terminal_only, random_policy, random_qtable


@pytest.fixture(scope="module")
def recorded_run():
    m = make_contraction(seed=50, n_states=4, max_controls=2)
    cfg = sspg.QLearnConfig(seed=3, max_iters=5000, scheduler="uniform-random:1",
                            delay_model=("uniform", 5), record_full_history=True)
    q, run = sspg.run_qlearning(m, cfg)
    return m, q, run


# ---------------------------------------------------------------------------
# pinned-policy Q-backup
# ---------------------------------------------------------------------------


def test_pinned_backup_terminal_only():
    m = make_terminal_only(seed=51)
    rng = np.random.default_rng(0)
    for _ in range(5):
        nu = random_policy(m, 2, rng)
        q = random_qtable(m, rng)
        assert np.allclose(sspg.q_bellman_max_fixed(m, nu, q), m.g, atol=1e-12)


def test_pinned_backup_below_minimax():
    rng = np.random.default_rng(1)
    for seed in range(10):
        m = make_contraction(seed=800 + seed)
        nu = random_policy(m, 2, rng)
        q = random_qtable(m, rng)
        assert (
            sspg.q_bellman_max_fixed(m, nu, q) <= sspg.q_bellman(m, q) + 1e-10
        ).all()


def test_pinned_backup_scalar_fixed_point(self_loop):
    nu = sspg.uniform_policy(self_loop, 2)
    # singleton controls: coincides with the minimax backup, fixed point 2
    q = np.zeros(1)
    for _ in range(200):
        q = sspg.q_bellman_max_fixed(self_loop, nu, q)
    assert q[0] == pytest.approx(2.0, abs=1e-9)
    assert sspg.q_bellman_max_fixed(self_loop, nu, [2.0]) == pytest.approx([2.0])


def test_pinned_backup_monotone_nonexpansive():
    rng = np.random.default_rng(2)
    m = make_contraction(seed=52)
    nu = random_policy(m, 2, rng)
    for _ in range(20):
        x = random_qtable(m, rng)
        y = x + rng.uniform(0, 2, size=m.n_triplets)
        fx, fy = sspg.q_bellman_max_fixed(m, nu, x), sspg.q_bellman_max_fixed(m, nu, y)
        assert (fx <= fy + 1e-10).all()
        z = random_qtable(m, rng)
        fz = sspg.q_bellman_max_fixed(m, nu, z)
        assert np.abs(fx - fz).max() <= np.abs(x - z).max() + 1e-9


# ---------------------------------------------------------------------------
# contraction certificate
# ---------------------------------------------------------------------------


def test_certificate_all_terminal():
    m = make_terminal_only(seed=53)
    cert = sspg.build_contraction_certificate(m, sspg.uniform_policy(m, 2))
    assert np.allclose(cert.xi, 1.0, atol=1e-9)
    assert cert.beta == pytest.approx(0.0, abs=1e-9)


def test_certificate_self_loop(self_loop):
    cert = sspg.build_contraction_certificate(self_loop, sspg.uniform_policy(self_loop, 2))
    assert cert.xi[0] == pytest.approx(2.0, abs=1e-9)
    assert cert.beta == pytest.approx(0.5, abs=1e-9)


def test_certificate_requires_proper_policy(everett):
    looper = sspg.pure_policy(everett, 2, {"1": "1"})
    with pytest.raises(sspg.ImproperPolicyError, match="proper"):
        sspg.build_contraction_certificate(everett, looper)


def test_certificate_inequality_and_contraction():
    rng = np.random.default_rng(3)
    for seed in range(10):
        kappa = 0.1 + 0.05 * (seed % 3)
        m = make_contraction(seed=900 + seed, n_states=3, max_controls=2, kappa=kappa)
        nu = random_policy(m, 2, rng)
        cert = sspg.build_contraction_certificate(m, nu)
        assert (cert.xi >= 1.0 - 1e-12).all()
        assert 0.0 <= cert.beta < 1.0
        # hitting-time bound: expected steps to terminate <= 1/kappa
        assert cert.beta <= 1.0 - kappa + 1e-9
        assert (cert.xi <= 1.0 / kappa + 1e-9).all()
        # the defining inequality, triplet by triplet
        sup_xi_nu = np.array([x.max() for x in cert.xi_nu])
        assert ((m.P[:, 1:] @ sup_xi_nu) <= cert.beta * cert.xi + 1e-8).all()
        # weighted-norm contraction on random pairs
        for _ in range(25):
            qa, qb = random_qtable(m, rng), random_qtable(m, rng)
            lhs = cert.weighted_norm(
                sspg.q_bellman_max_fixed(m, nu, qa) - sspg.q_bellman_max_fixed(m, nu, qb)
            )
            assert lhs <= (cert.beta + 1e-8) * cert.weighted_norm(qa - qb)


def test_certificate_serializes(self_loop):
    cert = sspg.build_contraction_certificate(self_loop, sspg.uniform_policy(self_loop, 2))
    doc = cert.to_json(self_loop)
    assert doc["beta"] == pytest.approx(0.5, abs=1e-9)
    assert doc["xi"][0]["xi"] == pytest.approx(2.0, abs=1e-9)


# ---------------------------------------------------------------------------
# coupled lower process
# ---------------------------------------------------------------------------


def test_coupling_no_violations(recorded_run):
    m, q, run = recorded_run
    rng = np.random.default_rng(4)
    for nu in (sspg.uniform_policy(m, 2), random_policy(m, 2, rng)):
        report = sspg.run_coupled_lower_process(m, nu, run)
        assert report.ok
        assert (report.min_margin >= -1e-9).all()
        assert (q >= report.qhat_final - 1e-9).all()


def test_coupling_terminal_only_tight():
    m = make_terminal_only(seed=54)
    cfg = sspg.QLearnConfig(seed=6, max_iters=4000, scheduler="all", record_full_history=True)
    q, run = sspg.run_qlearning(m, cfg)
    report = sspg.run_coupled_lower_process(m, sspg.uniform_policy(m, 2), run)
    # both processes relax toward the realized costs: the coupling is tight
    assert np.abs(report.qhat_final - q).max() == 0.0
    assert np.abs(q - m.g).max() <= 1e-2


def test_coupling_singleton_maximizer_identical():
    m = sspg.generate_model(
        sspg.GeneratorConfig(n_states=3, max_controls=1, termination_floor=0.2, seed=55)
    )
    cfg = sspg.QLearnConfig(seed=2, max_iters=3000, scheduler="uniform-random:2",
                            delay_model=("uniform", 3), record_full_history=True)
    q, run = sspg.run_qlearning(m, cfg)
    report = sspg.run_coupled_lower_process(m, sspg.uniform_policy(m, 2), run)
    assert (report.qhat_final == q).all()


def test_coupling_requires_history():
    m = make_contraction(seed=56)
    _, run = sspg.run_qlearning(m, sspg.QLearnConfig(seed=0, max_iters=10))
    with pytest.raises(ValueError, match="history"):
        sspg.run_coupled_lower_process(m, sspg.uniform_policy(m, 2), run)


def test_coupling_csv(tmp_path, recorded_run):
    m, q, run = recorded_run
    report = sspg.run_coupled_lower_process(m, sspg.uniform_policy(m, 2), run)
    path = tmp_path / "coupling.csv"
    report.to_csv(path, m)
    lines = open(path).read().splitlines()
    assert lines[0] == "i,u,v,min_margin"
    assert len(lines) == m.n_triplets + 1


def test_upper_coupling_via_negated_swapped_game(recorded_run):
    """Upper coupling has no separate code path: the lower-process machinery
    applied to the negated role-swapped game bounds runs on that game, which
    is the upper-bound statement for negated iterates."""
    m, q, run = recorded_run
    from sspg.solve import _swap_negate

    m_neg = _swap_negate(m)
    cfg = sspg.QLearnConfig(seed=run.config.seed, max_iters=2000,
                            scheduler=run.config.scheduler,
                            delay_model=run.config.delay_model,
                            record_full_history=True)
    _, run_neg = sspg.run_qlearning(m_neg, cfg)
    report = sspg.run_coupled_lower_process(m_neg, sspg.uniform_policy(m_neg, 2), run_neg)
    assert report.ok


# ---------------------------------------------------------------------------
# trackers
# ---------------------------------------------------------------------------


def test_tracker_first_update_overwrites(self_loop):
    state = sspg.TrackerState.initial(self_loop)
    new = sspg.update_trackers(state, (0, 1.0, 1, 4.5))
    assert new.g_tilde[0] == 4.5
    assert new.q_hat[0].tolist() == [0.0, 1.0]
    # pure function: the input state is untouched
    assert state.g_tilde[0] == 0.0
    assert state.q_hat[0].tolist() == [0.5, 0.5]


def test_tracker_deterministic_transitions_pin_unit_vector():
    m = sspg.GameModel(["1"], {"1": ["a"]}, {"1": ["x"]},
                       {("1", "a", "x"): [("1", 1.0, 2.0)]})
    state = sspg.TrackerState.initial(m)
    for k in range(10):
        state = sspg.update_trackers(state, (0, 1.0 / (1 + k) ** 0.75, 1, 2.0))
        assert state.q_hat[0].tolist() == [0.0, 1.0]
    assert state.g_tilde[0] == pytest.approx(2.0, abs=1e-12)


def test_tracker_batch_matches_pure_updates():
    m = make_contraction(seed=59, n_states=3, max_controls=2)
    cfg = sspg.QLearnConfig(seed=4, max_iters=300, scheduler="uniform-random:2",
                            record_full_history=True)
    _, run = sspg.run_qlearning(m, cfg)
    batch = sspg.run_trackers(m, run)
    state = sspg.TrackerState.initial(m)
    ev = run.events
    for k in range(len(ev)):
        state = sspg.update_trackers(
            state, (int(ev.ell[k]), float(ev.gamma[k]), int(ev.j[k]), float(ev.cost[k]))
        )
    assert np.allclose(state.g_tilde, batch.g_tilde, atol=0.0)
    assert np.allclose(state.q_hat, batch.q_hat, atol=0.0)


def test_tracker_convergence_and_support():
    m = make_contraction(seed=57, n_states=3, max_controls=2)
    cfg = sspg.QLearnConfig(seed=1, max_iters=60_000, scheduler="all",
                            record_full_history=True)
    _, run = sspg.run_qlearning(m, cfg)
    state = sspg.run_trackers(m, run, check_support=True)
    assert np.abs(state.g_tilde - m.g).max() <= 0.02
    assert np.abs(state.q_hat - m.P).max() <= 0.02
    # support containment
    assert ((state.q_hat > 0) <= (m.P > 0)).all()


def test_tracker_requires_history():
    m = make_contraction(seed=58)
    _, run = sspg.run_qlearning(m, sspg.QLearnConfig(seed=0, max_iters=5))
    with pytest.raises(ValueError, match="history"):
        sspg.run_trackers(m, run)
