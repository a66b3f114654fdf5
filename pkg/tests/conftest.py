import numpy as np
import pytest

import sspg


@pytest.fixture(scope="session")
def everett():
    return sspg.load_bundled_model("everett")


@pytest.fixture(scope="session")
def zerocost():
    return sspg.load_bundled_model("zerocost")


@pytest.fixture(scope="session")
def pursuit():
    return sspg.load_bundled_model("pursuit")


@pytest.fixture(scope="session")
def self_loop():
    """Single state, single controls, p(stay)=p(stop)=1/2, unit cost."""
    return sspg.load_model(
        """
        {"states": ["1"],
         "controls1": {"1": ["a"]},
         "controls2": {"1": ["x"]},
         "transitions": [
           {"i": "1", "u": "a", "v": "x",
            "next": [{"j": "0", "p": 0.5, "cost": 1.0},
                     {"j": "1", "p": 0.5, "cost": 1.0}]}]}
        """
    )


def make_terminal_only(seed=0, n_states=3, max_controls=2, cost_range=(0.0, 1.0)):
    """Every transition goes straight to the terminal state."""
    return sspg.generate_model(
        sspg.GeneratorConfig(
            n_states=n_states,
            max_controls=max_controls,
            termination_floor=1.0,
            cost_range=cost_range,
            family="contraction",
            seed=seed,
        )
    )


def make_contraction(seed=0, n_states=3, max_controls=2, kappa=0.1, cost_range=(0.0, 1.0)):
    return sspg.generate_model(
        sspg.GeneratorConfig(
            n_states=n_states,
            max_controls=max_controls,
            termination_floor=kappa,
            cost_range=cost_range,
            family="contraction",
            seed=seed,
        )
    )


def random_policy(m, player, rng):
    """Random fully-mixed stationary policy."""
    ctrl = m.controls1 if player == sspg.PLAYER_MIN else m.controls2
    rules = {s: rng.dirichlet(np.ones(len(ctrl[s]))) for s in m.states}
    return sspg.StationaryPolicy(player, rules)


def random_values(m, rng, scale=10.0):
    return rng.uniform(-scale, scale, size=m.n)


def random_qtable(m, rng, scale=10.0):
    return rng.uniform(-scale, scale, size=m.n_triplets)
