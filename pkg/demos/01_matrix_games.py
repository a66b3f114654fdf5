"""Matrix games: the kernel every operator evaluation reduces to.

Solves a few small zero-sum matrix games (row player minimizes), prints the
mixed strategies, and checks the saddle-point certificate: no pure column
response beats the row strategy by more than the value, and no pure row
response does better than the value against the column strategy.
"""

import numpy as np

import sspg

games = {
    "matching pennies": [[1, -1], [-1, 1]],
    "mixed 2x2": [[3, 0], [1, 2]],
    "single row": [[4, -2, 7]],
    "random 4x5": np.random.default_rng(1).uniform(-5, 5, size=(4, 5)),
}

for name, a in games.items():
    a = np.asarray(a, dtype=float)
    sol = sspg.solve_matrix_game(a)
    br_col, col_witness = sspg.best_response_value(a, sol.row_strategy, "row")
    br_row, row_witness = sspg.best_response_value(a, sol.col_strategy, "col")
    print(f"{name}:")
    print(f"  value          {sol.value:+.6f}")
    print(f"  row strategy   {np.round(sol.row_strategy, 4)}")
    print(f"  col strategy   {np.round(sol.col_strategy, 4)}")
    print(f"  best column response: {br_col:+.6f} (col {col_witness}) "
          f"-> slack {br_col - sol.value:.2e}")
    print(f"  best row response:    {br_row:+.6f} (row {row_witness}) "
          f"-> slack {sol.value - br_row:.2e}")
    maximin = -sspg.solve_matrix_game(-a.T).value
    print(f"  minimax - maximin = {sol.value - maximin:.2e}")
    print()
