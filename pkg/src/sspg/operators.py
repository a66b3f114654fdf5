"""Dynamic-programming operators on value vectors and Q-tables.

Value vectors are plain float arrays indexed by the model's non-terminal
states (the terminal state's value is identically zero and never stored).
Q-tables are float arrays over the canonical triplet index, with the
terminal entry pinned to zero implicitly.

Every minimax evaluation reduces to :func:`sspg.matgame.solve_matrix_game`
on a per-state stage matrix; there are no specialized minimax code paths
here.  Operators with one player's policy fixed are computed as pure best
responses over the opponent's pure controls, which is exact because a
linear function on a simplex attains its optimum at a vertex.
"""

from __future__ import annotations

import numpy as np

from .matgame import solve_matrix_game
from .model import (
    PLAYER_MAX,
    PLAYER_MIN,
    GameModel,
    StationaryPolicy,
    policy_arrays,
)


def _as_values(m: GameModel, values) -> np.ndarray:
    j = np.asarray(values, dtype=float)
    if j.shape != (m.n,):
        raise ValueError(f"value vector needs shape ({m.n},), got {j.shape}")
    return j


def _as_qtable(m: GameModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (m.n_triplets,):
        raise ValueError(f"Q-table needs shape ({m.n_triplets},), got {q.shape}")
    return q


def stage_matrices(m: GameModel, values) -> np.ndarray:
    """Per-triplet one-step costs g + p·J, flattened over the triplet index."""
    j = _as_values(m, values)
    return m.g + m.P[:, 1:] @ j


def q_from_values(m: GameModel, values) -> np.ndarray:
    """Change of variable J -> Q: Q(i,u,v) = g(i,u,v) + sum_j p_ij(u,v) J(j)."""
    return stage_matrices(m, values)


def values_from_q(m: GameModel, q) -> np.ndarray:
    """Change of variable Q -> J: per-state matrix-game value of Q(i,·,·)."""
    q = _as_qtable(m, q)
    return np.array(
        [solve_matrix_game(m.q_block(q, i)).value for i in range(1, m.n + 1)]
    )


def bellman(m: GameModel, values) -> np.ndarray:
    """One-step minimax backup on state values.

    Component i is the matrix-game value of A_i[u][v] = g(i,u,v) + p·J.
    """
    return values_from_q(m, stage_matrices(m, values))


def bellman_maximin(m: GameModel, values) -> np.ndarray:
    """Maximin variant of :func:`bellman` (sup over the maximizer first).

    Computed through the same matrix-game kernel via maximin(A) =
    -minimax(-A'); equals :func:`bellman` for finite games by the minimax
    theorem.
    """
    q = stage_matrices(m, values)
    return np.array(
        [-solve_matrix_game(-m.q_block(q, i).T).value for i in range(1, m.n + 1)]
    )


def bellman_min_fixed(m: GameModel, policy: StationaryPolicy, values) -> np.ndarray:
    """Backup with the minimizer committed to ``policy``; opponent best-responds."""
    rules = policy_arrays(m, policy, PLAYER_MIN)
    q = stage_matrices(m, values)
    out = np.empty(m.n)
    for i in range(1, m.n + 1):
        out[i - 1] = (rules[i - 1] @ m.q_block(q, i)).max()
    return out


def bellman_max_fixed(m: GameModel, policy: StationaryPolicy, values) -> np.ndarray:
    """Backup with the maximizer committed to ``policy``; opponent best-responds."""
    rules = policy_arrays(m, policy, PLAYER_MAX)
    q = stage_matrices(m, values)
    out = np.empty(m.n)
    for i in range(1, m.n + 1):
        out[i - 1] = (m.q_block(q, i) @ rules[i - 1]).min()
    return out


def bellman_pair(
    m: GameModel, mu: StationaryPolicy, nu: StationaryPolicy, values
) -> np.ndarray:
    """Affine backup c(mu,nu) + P(mu,nu) J for a committed policy pair."""
    r1 = policy_arrays(m, mu, PLAYER_MIN)
    r2 = policy_arrays(m, nu, PLAYER_MAX)
    q = stage_matrices(m, values)
    out = np.empty(m.n)
    for i in range(1, m.n + 1):
        out[i - 1] = r1[i - 1] @ m.q_block(q, i) @ r2[i - 1]
    return out


def q_bellman(m: GameModel, q) -> np.ndarray:
    """One-step minimax backup on Q-tables.

    (FQ)(i,u,v) = g(i,u,v) + sum_j p_ij(u,v) · val_j, where val_j is the
    matrix-game value of Q restricted to state j (zero at the terminal).
    """
    vals = values_from_q(m, q)
    return m.g + m.P[:, 1:] @ vals


def greedy_policies(
    m: GameModel, q
) -> tuple[StationaryPolicy, StationaryPolicy]:
    """Per-state matrix-game optimal decision rules of a Q-table.

    At the Q-table solving Q = FQ these form an equilibrium pair when the
    game's structural assumptions hold; on other inputs they are only
    stage-game optimal for the given Q (no game-level optimality claim).
    """
    q = _as_qtable(m, q)
    rules1, rules2 = {}, {}
    for i, s in enumerate(m.states, start=1):
        sol = solve_matrix_game(m.q_block(q, i))
        rules1[s] = sol.row_strategy
        rules2[s] = sol.col_strategy
    return (
        StationaryPolicy(PLAYER_MIN, rules1),
        StationaryPolicy(PLAYER_MAX, rules2),
    )
