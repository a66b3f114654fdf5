"""Seeded random game generators for experiments and tests.

Three families:

``contraction``
    Every triplet puts at least ``termination_floor`` mass on the terminal
    state, so termination is geometric under every policy pair; all the
    structural assumptions hold and every policy of either player is proper.

``loopy``
    The minimizer's first control always carries substantial termination
    mass, other rows may have none (pure in-game rows), and every cost is
    strictly positive.  Prolonging pairs therefore all have positive-gain
    recurrent classes, the minimizer's all-first-control policy is proper,
    and costs bounded below by zero safeguard the maximizer, so the
    structural assumptions hold while prolonging pairs exist.

``sequential``
    Like ``contraction`` but exactly one player has a non-singleton control
    set at each state, which makes exhaustive deterministic-policy analysis
    cheap and deterministic equilibria exist.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GameModel

FAMILIES = ("contraction", "loopy", "sequential")


@dataclass(frozen=True)
class GeneratorConfig:
    n_states: int = 3
    max_controls: int = 2
    termination_floor: float = 0.1
    cost_range: tuple[float, float] = (0.0, 1.0)
    family: str = "contraction"
    seed: int = 0

    def __post_init__(self):
        if self.n_states < 1:
            raise ValueError("n_states must be at least 1")
        if self.max_controls < 1:
            raise ValueError("max_controls must be at least 1")
        if not 0.0 <= self.termination_floor <= 1.0:
            raise ValueError("termination_floor must lie in [0, 1]")
        lo, hi = self.cost_range
        if lo > hi:
            raise ValueError("cost_range must have lo <= hi")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.family == "loopy" and lo <= 0.0:
            raise ValueError("loopy family needs strictly positive costs (lo > 0)")


_C1 = "abcdefgh"
_C2 = "xyzwpqrs"


def _random_dist(rng: np.random.Generator, n_succ: int) -> np.ndarray:
    """Random distribution over 0..n with a sparse support."""
    w = rng.random(n_succ) * (rng.random(n_succ) < 0.75)
    if not w.any():
        w[rng.integers(n_succ)] = 1.0
    return w / w.sum()


def generate_model(cfg: GeneratorConfig) -> GameModel:
    """Draw a valid game; deterministic in the seed."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_states
    states = [str(i) for i in range(1, n + 1)]
    lo, hi = cfg.cost_range
    kappa = cfg.termination_floor

    controls1, controls2 = {}, {}
    for s in states:
        if cfg.family == "sequential":
            mover = rng.integers(2)
            k = int(rng.integers(2, cfg.max_controls + 1)) if cfg.max_controls > 1 else 1
            controls1[s] = list(_C1[: k if mover == 0 else 1])
            controls2[s] = list(_C2[: k if mover == 1 else 1])
        else:
            controls1[s] = list(_C1[: int(rng.integers(1, cfg.max_controls + 1))])
            controls2[s] = list(_C2[: int(rng.integers(1, cfg.max_controls + 1))])

    transitions = {}
    for si, s in enumerate(states):
        for ui, u in enumerate(controls1[s]):
            for v in controls2[s]:
                p = _random_dist(rng, n + 1)
                if cfg.family == "loopy":
                    if ui == 0:
                        floor = max(kappa, 0.2)
                        p = floor * np.eye(n + 1)[0] + (1.0 - floor) * p
                    elif rng.random() < 0.5 and n >= 1:
                        p[0] = 0.0  # pure in-game row
                        if not p.any():
                            p[si + 1] = 1.0
                        p = p / p.sum()
                else:
                    p = kappa * np.eye(n + 1)[0] + (1.0 - kappa) * p
                entries = [
                    (str(j) if j else "0", float(p[j]), float(rng.uniform(lo, hi)))
                    for j in range(n + 1)
                    if p[j] > 0.0
                ]
                transitions[(s, u, v)] = entries
    return GameModel(states, controls1, controls2, transitions)
