"""Exact solver for two-player zero-sum matrix games.

``A[u][v]`` is the cost paid by the row player (minimizer) to the column
player (maximizer).  The solver returns the game value together with a
saddle-point certificate pair of mixed strategies: no column response beats
the row strategy by more than the value, and symmetrically for rows.

The general case is solved by linear programming after shifting the matrix
positive: maximize ``1'x`` subject to ``A'x <= 1, x >= 0`` with a dense
primal simplex using Bland's rule, which cannot cycle; the column strategy
is read off the slack reduced costs.  Degenerate one-row / one-column games
short-circuit to pure min/max.  Tie-breaking is lowest-index everywhere, so
results are deterministic for a fixed matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = 1e-12
_MAX_PIVOTS = 10_000


@dataclass(frozen=True)
class MatrixGameSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray


def _as_matrix(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"matrix game needs a 2-D m x n matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix game entries must be finite")
    return a


def _pure(size: int, index: int) -> np.ndarray:
    s = np.zeros(size)
    s[index] = 1.0
    return s


def _simplex(a: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and strategies for an all-positive matrix via primal simplex."""
    m, n = a.shape
    # tableau rows: A' x + s = 1;  objective: maximize sum(x)
    t = np.zeros((n, m + n + 1))
    t[:, :m] = a.T
    t[:, m : m + n] = np.eye(n)
    t[:, -1] = 1.0
    obj = np.zeros(m + n + 1)
    obj[:m] = -1.0  # reduced costs z_j - c_j, slack basis
    basis = list(range(m, m + n))

    for _ in range(_MAX_PIVOTS):
        enter = -1
        for j in range(m + n):
            if obj[j] < -_EPS:  # Bland: lowest-index improving column
                enter = j
                break
        if enter < 0:
            break
        leave, best, best_var = -1, np.inf, np.inf
        for i in range(n):
            if t[i, enter] > _EPS:
                ratio = t[i, -1] / t[i, enter]
                if ratio < best - _EPS or (ratio < best + _EPS and basis[i] < best_var):
                    leave, best, best_var = i, ratio, basis[i]
        if leave < 0:
            raise RuntimeError("matrix game LP unbounded; input not positive?")
        piv = t[leave, enter]
        t[leave] /= piv
        for i in range(n):
            if i != leave and t[i, enter] != 0.0:
                t[i] -= t[i, enter] * t[leave]
        obj -= obj[enter] * t[leave]
        basis[leave] = enter
    else:
        raise RuntimeError("matrix game LP did not terminate")

    x = np.zeros(m)
    for i, b in enumerate(basis):
        if b < m:
            x[b] = t[i, -1]
    y = obj[m : m + n].copy()  # dual values from slack reduced costs
    total = x.sum()
    if total <= 0:
        raise RuntimeError("matrix game LP returned a degenerate solution")
    value = 1.0 / total
    row = np.clip(x, 0.0, None)
    col = np.clip(y, 0.0, None)
    return value, row / row.sum(), col / col.sum()


def solve_matrix_game(matrix) -> MatrixGameSolution:
    """Solve a matrix game; returns value and a certificate-valid mixed pair."""
    a = _as_matrix(matrix)
    m, n = a.shape
    if m == 1:
        j = int(np.argmax(a[0]))
        return MatrixGameSolution(float(a[0, j]), np.ones(1), _pure(n, j))
    if n == 1:
        i = int(np.argmin(a[:, 0]))
        return MatrixGameSolution(float(a[i, 0]), _pure(m, i), np.ones(1))
    shift = 1.0 - a.min()
    if shift < 0.0:
        shift = 0.0
    value, row, col = _simplex(a + shift)
    return MatrixGameSolution(value - shift, row, col)


def best_response_value(matrix, strategy, side: str) -> tuple[float, int]:
    """Pure best response against one player's mixed strategy.

    ``side="row"``: the row strategy is given, the opponent maximizes over
    columns; returns ``(max_v (s'A)_v, argmax)``.  ``side="col"``: the given
    column strategy is minimized over rows.  Ties break to the lowest index.
    """
    a = _as_matrix(matrix)
    s = np.asarray(strategy, dtype=float)
    if side == "row":
        if s.shape != (a.shape[0],):
            raise ValueError(f"row strategy needs {a.shape[0]} entries, got {s.shape}")
        payoff = s @ a
        w = int(np.argmax(payoff))
    elif side == "col":
        if s.shape != (a.shape[1],):
            raise ValueError(f"column strategy needs {a.shape[1]} entries, got {s.shape}")
        payoff = a @ s
        w = int(np.argmin(payoff))
    else:
        raise ValueError(f'side must be "row" or "col", got {side!r}')
    return float(payoff[w]), w


def value_2x2(a: float, b: float, c: float, d: float) -> float:
    """Closed-form value of [[a, b], [c, d]] (row minimizes).

    Pure saddle if the pure upper and lower values meet; otherwise both
    players mix and the value is (ad - bc) / (a - b - c + d).
    """
    up = min(max(a, b), max(c, d))
    lo = max(min(a, c), min(b, d))
    if lo == up:
        return up
    den = a - b - c + d
    return up if den == 0.0 else (a * d - b * c) / den


def flat_game_value(vals, nu: int, nv: int) -> float:
    """Game value of a u-major flattened ``nu x nv`` matrix.

    Fast dispatch used in sampling loops: single-row/column games are pure
    min/max, 2x2 uses the closed form, anything larger falls back to the LP
    kernel.  Agrees with :func:`solve_matrix_game` (property-tested).
    """
    if nu == 1:
        return max(vals)
    if nv == 1:
        return min(vals)
    if nu == 2 and nv == 2:
        return value_2x2(vals[0], vals[1], vals[2], vals[3])
    return solve_matrix_game(np.asarray(vals, dtype=float).reshape(nu, nv)).value


def matrix_game_value(matrix) -> float:
    """Game value only; same dispatch as :func:`flat_game_value`."""
    a = _as_matrix(matrix)
    return flat_game_value(a.ravel().tolist(), a.shape[0], a.shape[1])
