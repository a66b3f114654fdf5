"""The bundled one-state counterexample game and what the toolkit says about it.

At state 1 both players pick from {1, 2}: matching controls end the game at
cost 1, (u=1, v=2) ends it at cost 0, and (u=2, v=1) loops forever for free.
The game's value is 1, yet the maximizer has no optimal policy and the pair
(u=2, v=1) prolongs the game at zero total cost -- exactly the structure the
solver's assumption checker is built to flag.

The demo shows: value iteration creeping toward 1 along x_{k+1} = 1/(2-x_k)
(sublinear, because the fixed point is not contractive here), the exact
fixed-point refinement recovering 1 in one policy-evaluation step, the
structural report with its witness pair, and what each pure policy pair
actually costs.
"""

import numpy as np

import sspg

m = sspg.load_bundled_model("everett")

print("value iteration from 0 (tol 1e-6):")
values, trace = sspg.value_iteration(m, tol=1e-6, record_iterates=True)
for k in (0, 1, 2, 3, 10, 100, len(trace.rows)):
    print(f"  iterate {k:4d}: J(1) = {trace.iterates[k][0]:.9f}")
print(f"  outcome {trace.outcome} after {len(trace.rows)} iterations; J = {values[0]:.6f}")

refined, accepted = sspg.refine_fixed_point(m, values)
print(f"refined via greedy policy evaluation: J = {refined[0]:.12f} (accepted: {accepted})")
print()

print("structural assumption report:")
report = sspg.check_ssp_game_assumption(m)
print(f"  overall: {report.overall}")
clause = report.clause_prolonging
print(f"  prolonging clause: {clause.status} ({clause.note})")
print(f"  witness mu: {clause.witness_mu.to_json(m)['rules']}")
print(f"  witness nu: {clause.witness_nu.to_json(m)['rules']}")
print()

print("every pure policy pair, evaluated exactly:")
for mu in sspg.iter_pure_policies(m, 1):
    for nu in sspg.iter_pure_policies(m, 2):
        ev = sspg.evaluate_pair(m, mu, nu)
        u = m.controls1["1"][int(np.argmax(mu.rule("1")))]
        v = m.controls2["1"][int(np.argmax(nu.rule("1")))]
        tag = "prolonging " + ",".join(ev.flags) if ev.prolonging else "terminates"
        print(f"  (u={u}, v={v}): value {ev.values[0]:+.3f}  [{tag}]")
print()

print("policy iteration for the minimizer from the always-terminate control:")
start = sspg.pure_policy(m, 1, {"1": "1"})
x, policies, pi_trace = sspg.policy_iteration(m, 1, start, tol=1e-9)
print(f"  outcome {pi_trace.outcome} in {len(pi_trace.rows)} outer iterations, J = {x[0]:.9f}")
