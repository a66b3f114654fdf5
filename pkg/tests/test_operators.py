import numpy as np
import pytest

import sspg
from conftest import make_contraction, make_terminal_only, random_policy, random_qtable, random_values


def random_cases(n_cases=40, seed=0, **kwargs):
    rng = np.random.default_rng(seed)
    for k in range(n_cases):
        m = make_contraction(seed=1000 + k, n_states=int(rng.integers(1, 5)),
                             max_controls=int(rng.integers(1, 4)), **kwargs)
        yield m, rng


def test_everett_backup_from_zero(everett):
    # induced stage matrix at J=0 is [[1,0],[0,1]]: no saddle, value 1/(1+1) = 0.5
    assert sspg.bellman(everett, [0.0]) == pytest.approx([0.5], abs=1e-9)


def test_everett_fixed_point(everett):
    assert sspg.bellman(everett, [1.0]) == pytest.approx([1.0], abs=1e-9)


def test_terminal_only_backup_ignores_values():
    m = make_terminal_only(seed=2)
    j1 = sspg.bellman(m, np.zeros(m.n))
    j2 = sspg.bellman(m, np.full(m.n, 37.5))
    assert np.allclose(j1, j2, atol=1e-12)
    stage = [sspg.solve_matrix_game(m.q_block(m.g, i)).value for i in range(1, m.n + 1)]
    assert np.allclose(j1, stage, atol=1e-12)


def test_minimax_equals_maximin():
    for m, rng in random_cases(30):
        j = random_values(m, rng)
        assert np.abs(sspg.bellman(m, j) - sspg.bellman_maximin(m, j)).max() < 1e-8


def test_single_control_game_is_affine():
    m = make_contraction(seed=5, max_controls=1)
    rng = np.random.default_rng(0)
    j = random_values(m, rng)
    want = m.g + m.P[:, 1:] @ j  # one triplet per state
    assert np.allclose(sspg.bellman(m, j), want, atol=1e-12)
    assert np.allclose(sspg.bellman_maximin(m, j), want, atol=1e-12)


def test_everett_min_fixed_pure_one(everett):
    mu = sspg.pure_policy(everett, 1, {"1": "1"})
    for j in ([-4.0], [0.0], [11.0]):
        assert sspg.bellman_min_fixed(everett, mu, j) == pytest.approx([1.0], abs=1e-12)


def test_everett_pair_backup(everett):
    mu = sspg.pure_policy(everett, 1, {"1": "1"})
    nu = sspg.pure_policy(everett, 2, {"1": "1"})
    assert sspg.bellman_pair(everett, mu, nu, [123.0]) == pytest.approx([1.0], abs=1e-12)


def test_operator_chain_inequalities():
    for m, rng in random_cases(30):
        j = random_values(m, rng)
        mu = random_policy(m, 1, rng)
        nu = random_policy(m, 2, rng)
        t_mu = sspg.bellman_min_fixed(m, mu, j)
        t_nu = sspg.bellman_max_fixed(m, nu, j)
        t_pair = sspg.bellman_pair(m, mu, nu, j)
        t = sspg.bellman(m, j)
        t_tilde = sspg.bellman_maximin(m, j)
        eps = 1e-10
        assert (t_nu <= t_pair + eps).all() and (t_pair <= t_mu + eps).all()
        assert (t_nu <= t_tilde + eps).all()
        assert (t_tilde <= t + 1e-8).all()
        assert (t <= t_mu + eps).all()


def test_monotonicity():
    for m, rng in random_cases(20):
        x = random_values(m, rng)
        y = x + rng.uniform(0, 3, size=m.n)
        assert (sspg.bellman(m, x) <= sspg.bellman(m, y) + 1e-10).all()
        qx = random_qtable(m, rng)
        qy = qx + rng.uniform(0, 3, size=m.n_triplets)
        assert (sspg.q_bellman(m, qx) <= sspg.q_bellman(m, qy) + 1e-10).all()


def test_sup_norm_nonexpansive():
    for m, rng in random_cases(20):
        x, y = random_values(m, rng), random_values(m, rng)
        lhs = np.abs(sspg.bellman(m, x) - sspg.bellman(m, y)).max()
        assert lhs <= np.abs(x - y).max() + 1e-9
        qx, qy = random_qtable(m, rng), random_qtable(m, rng)
        lhs = np.abs(sspg.q_bellman(m, qx) - sspg.q_bellman(m, qy)).max()
        assert lhs <= np.abs(qx - qy).max() + 1e-9


def test_q_value_round_trip():
    for m, rng in random_cases(20):
        j = random_values(m, rng)
        assert np.allclose(
            sspg.values_from_q(m, sspg.q_from_values(m, j)),
            sspg.bellman(m, j),
            atol=1e-10,
        )
    m = make_contraction(seed=42)
    assert np.allclose(sspg.q_from_values(m, np.zeros(m.n)), m.g, atol=1e-15)


def test_q_backup_terminal_only_is_stage_cost():
    m = make_terminal_only(seed=9)
    rng = np.random.default_rng(1)
    q = random_qtable(m, rng)
    assert np.allclose(sspg.q_bellman(m, q), m.g, atol=1e-12)


def test_q_backup_scalar_fixed_point(self_loop):
    # single state/control self-loop: FQ = 1 + 0.5 Q, fixed point 2
    assert sspg.q_bellman(self_loop, [0.0]) == pytest.approx([1.0], abs=1e-15)
    assert sspg.q_bellman(self_loop, [2.0]) == pytest.approx([2.0], abs=1e-15)


def test_everett_q_table(everett):
    q = sspg.q_from_values(everett, [1.0])
    # canonical order (1,1,1),(1,1,2),(1,2,1),(1,2,2)
    assert np.allclose(q, [1.0, 0.0, 1.0, 1.0], atol=1e-12)
    assert sspg.values_from_q(everett, q) == pytest.approx([1.0], abs=1e-9)
    assert np.allclose(sspg.q_bellman(everett, q), q, atol=1e-9)  # fixed point


def test_greedy_policies_matching_pennies():
    m = sspg.GameModel(
        ["1"], {"1": ["a", "b"]}, {"1": ["x", "y"]},
        {("1", "a", "x"): [("0", 1.0, 1.0)],
         ("1", "a", "y"): [("0", 1.0, -1.0)],
         ("1", "b", "x"): [("0", 1.0, -1.0)],
         ("1", "b", "y"): [("0", 1.0, 1.0)]},
    )
    mu, nu = sspg.greedy_policies(m, m.g)
    assert np.allclose(mu.rule("1"), [0.5, 0.5], atol=1e-9)
    assert np.allclose(nu.rule("1"), [0.5, 0.5], atol=1e-9)


def test_greedy_policies_pure_saddle():
    m = make_terminal_only(seed=3)
    mu, nu = sspg.greedy_policies(m, m.g)
    for i, s in enumerate(m.states, start=1):
        block = m.q_block(m.g, i)
        sol = sspg.solve_matrix_game(block)
        v_row, _ = sspg.best_response_value(block, mu.rule(s), "row")
        v_col, _ = sspg.best_response_value(block, nu.rule(s), "col")
        assert v_row <= sol.value + 1e-8
        assert v_col >= sol.value - 1e-8


def test_everett_greedy_certificate_at_fixed_point(everett):
    q = sspg.q_from_values(everett, [1.0])
    mu, nu = sspg.greedy_policies(everett, q)
    block = everett.q_block(q, 1)
    v_nu, _ = sspg.best_response_value(block, nu.rule("1"), "col")
    v_mu, _ = sspg.best_response_value(block, mu.rule("1"), "row")
    assert v_nu >= 1.0 - 1e-8
    assert v_mu <= 1.0 + 1e-8


def test_policy_player_mismatch(everett):
    nu = sspg.uniform_policy(everett, 2)
    with pytest.raises(sspg.PolicyMismatchError):
        sspg.bellman_min_fixed(everett, nu, [0.0])
