import itertools

import numpy as np
import pytest

import sspg
from sspg.matgame import flat_game_value


def oracle_2x2(a, b, c, d):
    """Independent closed-form oracle (row minimizes).

    Pure saddle when the pure upper and lower values coincide; otherwise the
    indifference equations give p = (d-c)/(a-b-c+d) for the row mix on the
    first row, q = (d-b)/(a-b-c+d) for the column mix, and value
    (ad-bc)/(a-b-c+d).
    """
    up = min(max(a, b), max(c, d))
    lo = max(min(a, c), min(b, d))
    if lo == up:
        return up, None, None
    den = a - b - c + d
    p = (d - c) / den
    q = (d - b) / den
    return (a * d - b * c) / den, (p, 1 - p), (q, 1 - q)


def certificate_slack(a, sol):
    a = np.asarray(a, dtype=float)
    br_row, _ = sspg.best_response_value(a, sol.row_strategy, "row")
    br_col, _ = sspg.best_response_value(a, sol.col_strategy, "col")
    return max(br_row - sol.value, sol.value - br_col)


def test_matching_pennies():
    sol = sspg.solve_matrix_game([[1, -1], [-1, 1]])
    assert sol.value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(sol.row_strategy, [0.5, 0.5], atol=1e-12)
    assert np.allclose(sol.col_strategy, [0.5, 0.5], atol=1e-12)


def test_singleton():
    sol = sspg.solve_matrix_game([[5.0]])
    assert sol.value == 5.0
    assert sol.row_strategy.tolist() == [1.0]
    assert sol.col_strategy.tolist() == [1.0]


def test_2x2_mixed_example():
    # oracle: p = (2-1)/(3-0-1+2) = 0.25, value = (3*2-0*1)/4 = 1.5, q = 0.5
    sol = sspg.solve_matrix_game([[3, 0], [1, 2]])
    assert sol.value == pytest.approx(1.5, abs=1e-9)
    assert np.allclose(sol.row_strategy, [0.25, 0.75], atol=1e-9)
    assert np.allclose(sol.col_strategy, [0.5, 0.5], atol=1e-9)


def test_everett_fixed_point_matrix():
    assert sspg.solve_matrix_game([[1, 0], [1, 1]]).value == pytest.approx(1.0, abs=1e-9)


def test_oracle_equivalence_all_small_integer_2x2():
    vals = range(-3, 4)
    for a, b, c, d in itertools.product(vals, repeat=4):
        want, _, _ = oracle_2x2(a, b, c, d)
        sol = sspg.solve_matrix_game([[a, b], [c, d]])
        assert sol.value == pytest.approx(want, abs=1e-9), (a, b, c, d)
        assert certificate_slack([[a, b], [c, d]], sol) < 1e-8, (a, b, c, d)


def test_duality_and_certificate_random():
    rng = np.random.default_rng(123)
    for _ in range(500):
        a = rng.uniform(-10, 10, size=(int(rng.integers(1, 7)), int(rng.integers(1, 7))))
        sol = sspg.solve_matrix_game(a)
        assert certificate_slack(a, sol) < 1e-8
        maximin = -sspg.solve_matrix_game(-a.T).value
        assert abs(maximin - sol.value) < 1e-8
        assert sol.value == pytest.approx(
            float(sol.row_strategy @ a @ sol.col_strategy), abs=1e-8
        )


def test_shift_scale_equivariance():
    rng = np.random.default_rng(7)
    for _ in range(100):
        a = rng.uniform(-5, 5, size=(int(rng.integers(2, 5)), int(rng.integers(2, 5))))
        alpha, beta = float(rng.uniform(0.1, 4.0)), float(rng.uniform(-8, 8))
        base = sspg.solve_matrix_game(a)
        moved = sspg.solve_matrix_game(alpha * a + beta)
        assert moved.value == pytest.approx(alpha * base.value + beta, abs=1e-7)
        assert certificate_slack(alpha * a + beta, moved) < 1e-8


def test_fast_value_agrees_with_lp():
    rng = np.random.default_rng(99)
    for _ in range(300):
        shape = (int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        a = rng.uniform(-6, 6, size=shape)
        fast = flat_game_value(a.ravel().tolist(), *shape)
        assert fast == pytest.approx(sspg.solve_matrix_game(a).value, abs=1e-8)


def test_best_response_examples():
    value, witness = sspg.best_response_value([[3, 0], [1, 2]], [0.25, 0.75], "row")
    assert value == pytest.approx(1.5, abs=1e-12)
    assert witness == 0  # both columns tie at 1.5; lowest index wins

    value, witness = sspg.best_response_value([[5.0]], [1.0], "row")
    assert (value, witness) == (5.0, 0)

    value, witness = sspg.best_response_value([[1, -1], [-1, 1]], [1.0, 0.0], "row")
    assert (value, witness) == (1.0, 0)


def test_best_response_dimension_mismatch():
    with pytest.raises(ValueError):
        sspg.best_response_value([[1, 2], [3, 4]], [0.5, 0.25, 0.25], "row")
    with pytest.raises(ValueError):
        sspg.best_response_value([[1, 2], [3, 4]], [1.0], "sideways")


def test_rejects_bad_matrices():
    with pytest.raises(ValueError):
        sspg.solve_matrix_game([[np.inf, 1.0]])
    with pytest.raises(ValueError):
        sspg.solve_matrix_game(np.zeros((0, 2)))


def test_deterministic_resolution():
    rng = np.random.default_rng(5)
    a = rng.uniform(-3, 3, size=(4, 4))
    s1 = sspg.solve_matrix_game(a)
    s2 = sspg.solve_matrix_game(a.copy())
    assert s1.value == s2.value
    assert (s1.row_strategy == s2.row_strategy).all()
    assert (s1.col_strategy == s2.col_strategy).all()
