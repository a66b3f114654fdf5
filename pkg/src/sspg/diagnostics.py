"""Boundedness diagnostics: coupled lower process, contraction certificates,
empirical trackers.

The coupled lower process replays a recorded Q-learning run with the
maximizer pinned to a fixed policy: the same stepsizes, successor samples,
realized costs, and delay offsets drive a second table whose update takes
the min over the remaining player's controls of the policy-averaged delayed
values.  Pathwise, the main iterates dominate the coupled ones, so a bounded
lower process certifies the run bounded below; the symmetric upper coupling
is obtained by running the same machinery on the negated, role-swapped
game.

For a *proper* fixed policy the one-policy Q-backup is a weighted sup-norm
contraction; the certificate (weights and modulus) is built from the
optimal costs of the induced all-costs-minus-one single-player problem and
validated triplet by triplet.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .model import (
    PLAYER_MAX,
    GameModel,
    StationaryPolicy,
    policy_arrays,
)
from .qlearn import QLearnRun, _replay_ring_filler
from .structure import build_sspa, forall_termination


class ImproperPolicyError(ValueError):
    """The contraction certificate requires a proper policy."""


def q_bellman_max_fixed(m: GameModel, nu: StationaryPolicy, q) -> np.ndarray:
    """Q-backup with the maximizer pinned to ``nu``.

    Component (i,u,v) is g(i,u,v) plus the kernel-weighted min over the
    successor's controls u~ of the nu-averaged Q at (j, u~, ·).  Never
    exceeds the minimax Q-backup componentwise.
    """
    rules = policy_arrays(m, nu, PLAYER_MAX)
    q = np.asarray(q, dtype=float)
    vals = np.empty(m.n)
    for i in range(1, m.n + 1):
        vals[i - 1] = (m.q_block(q, i) @ rules[i - 1]).min()
    return m.g + m.P[:, 1:] @ vals


@dataclass(frozen=True)
class ContractionCertificate:
    """Weights and modulus certifying the pinned-policy backup a contraction.

    ``xi`` (per triplet, all >= 1) are the negated optimal costs of the
    all-costs-minus-one auxiliary problem; ``beta = max (xi - 1) / xi < 1``.
    The defining inequality sum_j p_ij(u,v) max_u~ xi_nu(j,u~) <= beta *
    xi(i,u,v) is validated on every triplet at construction.
    """

    xi: np.ndarray  # per triplet, >= 1
    xi_nu: tuple[np.ndarray, ...]  # per state: policy-averaged weights over U(i)
    beta: float
    state_costs: np.ndarray  # optimal auxiliary costs at game states (<= -1)

    def weighted_norm(self, q) -> float:
        return float((np.abs(np.asarray(q, dtype=float)) / self.xi).max())

    def to_json(self, m: GameModel) -> dict:
        return {
            "beta": self.beta,
            "xi": [
                {"i": i, "u": u, "v": v, "xi": float(x)}
                for (i, u, v), x in zip(m.triplets, self.xi)
            ],
            "xi_nu": [
                {"i": s, "u": u, "xi": float(self.xi_nu[k][ui])}
                for k, s in enumerate(m.states)
                for ui, u in enumerate(m.controls1[s])
            ],
        }


def build_contraction_certificate(
    m: GameModel, nu: StationaryPolicy, tol: float = 1e-10, max_iter: int = 10**6
) -> ContractionCertificate:
    """Construct and validate the weighted sup-norm contraction certificate.

    Requires ``nu`` proper (terminating almost surely against every opposing
    policy); raises :class:`ImproperPolicyError` otherwise.  The weight
    equations are solved by value iteration from zero at tolerance ``tol``.
    """
    if not forall_termination(m, nu).all():
        raise ImproperPolicyError("certificate requires a proper policy")
    sspa = build_sspa(m, nu)

    h = np.zeros(m.n)  # auxiliary optimal costs at game states
    for _ in range(max_iter):
        h1 = np.array(
            [-1.0 + (sspa.s_probs[i][:, 1:] @ h).min() for i in range(m.n)]
        )
        if np.abs(h1 - h).max() <= tol:
            h = h1
            break
        h = h1
    else:
        raise RuntimeError("auxiliary cost iteration did not converge")

    j_triplets = -1.0 + m.P[:, 1:] @ h
    xi = -j_triplets
    rules = policy_arrays(m, nu, PLAYER_MAX)
    xi_nu = []
    for i in range(1, m.n + 1):
        xi_nu.append(m.q_block(xi, i) @ rules[i - 1])
    beta = float(((xi - 1.0) / xi).max())
    beta = max(beta, 0.0)

    sup_xi_nu = np.array([x.max() for x in xi_nu])
    lhs = m.P[:, 1:] @ sup_xi_nu
    slack = lhs - beta * xi
    if slack.max() > 1e-8:
        raise RuntimeError(
            f"certificate inequality violated by {slack.max():.3e}; auxiliary solve too loose"
        )
    return ContractionCertificate(xi, tuple(xi_nu), beta, h)


# ---------------------------------------------------------------------------
# Coupled lower process
# ---------------------------------------------------------------------------


@dataclass
class CouplingReport:
    """Result of replaying the lower process against a recorded run."""

    qhat_final: np.ndarray
    qhat_events: np.ndarray  # post-update coupled value per event
    min_margin: np.ndarray  # per component: min over time of Q - Qhat
    violations: tuple[tuple[int, int], ...]  # (event index, component)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_csv(self, path, m: GameModel) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["i", "u", "v", "min_margin"])
            for (i, u, v), margin in zip(m.triplets, self.min_margin):
                w.writerow([i, u, v, repr(float(margin))])


def run_coupled_lower_process(
    m: GameModel, nu: StationaryPolicy, run: QLearnRun, q0=None, slack: float = 1e-9
) -> CouplingReport:
    """Replay a recorded run's lower coupling under a fixed maximizer policy.

    Uses the recorded stepsizes, successors, realized costs, and delay
    offsets; the only change is the update target, which averages the
    delayed coupled table with ``nu`` at the successor state and minimizes
    over the remaining player's controls.  Reports any (event, component)
    where the main iterate drops below the coupled one by more than
    ``slack``; the domination is pathwise and exact, so none are expected
    when both processes start from the same table.
    """
    if run.events is None:
        raise ValueError("run was not recorded with full history")
    rules = policy_arrays(m, nu, PLAYER_MAX)
    ev = run.events
    depth = run.ring_depth
    n_events = len(ev)

    blocks = [m.state_block(i) for i in range(1, m.n + 1)]
    block_of = [None] + [list(range(off, off + nu_i * nv_i)) for off, nu_i, nv_i in blocks]
    shape_of = [None] + [(nu_i, nv_i) for _, nu_i, nv_i in blocks]
    sigma = [None] + [rules[i - 1].tolist() for i in range(1, m.n + 1)]

    qhat = (run.q0 if q0 is None else np.asarray(q0, dtype=float)).tolist()
    q_main = run.q0.tolist()
    ring = [qhat[:] for _ in range(depth)]
    fill = _replay_ring_filler(depth)
    t_prev = -1

    start_margin = np.array(q_main) - np.array(qhat)
    min_margin = start_margin.copy()
    qhat_events = np.empty(n_events)
    violations: list[tuple[int, int]] = []

    for k in range(n_events):
        t = int(ev.t[k])
        if t != t_prev:
            fill(ring, qhat, t_prev, t)
            t_prev = t
        ell = int(ev.ell[k])
        j = int(ev.j[k])
        gamma = float(ev.gamma[k])
        cost = float(ev.cost[k])
        if j == 0:
            val = 0.0
        else:
            comps = block_of[j]
            nu_j, nv_j = shape_of[j]
            s = sigma[j]
            offs = ev.offsets[k]
            best = None
            for ui in range(nu_j):
                acc = 0.0
                for vi in range(nv_j):
                    kk = ui * nv_j + vi
                    acc += s[vi] * ring[(t - int(offs[kk])) % depth][comps[kk]]
                if best is None or acc < best:
                    best = acc
            val = best
        new_hat = (1.0 - gamma) * qhat[ell] + gamma * (cost + val)
        qhat[ell] = new_hat
        qhat_events[k] = new_hat
        q_main[ell] = float(ev.new_q[k])
        margin = q_main[ell] - new_hat
        if margin < min_margin[ell]:
            min_margin[ell] = margin
        if margin < -slack:
            violations.append((k, ell))

    return CouplingReport(np.array(qhat), qhat_events, min_margin, tuple(violations))


# ---------------------------------------------------------------------------
# Empirical trackers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrackerState:
    """Stepsize-weighted empirical stage costs and transition frequencies.

    ``g_tilde`` tracks realized transition costs per triplet; ``q_hat``
    tracks successor frequencies per triplet as a distribution over states
    0..n, absolutely continuous with respect to the true kernel row by
    construction (it starts there and mixes in sampled unit vectors).
    """

    g_tilde: np.ndarray  # (|R|,)
    q_hat: np.ndarray  # (|R|, n+1)

    @classmethod
    def initial(cls, m: GameModel) -> "TrackerState":
        return cls(np.zeros(m.n_triplets), m.P.copy())


def update_trackers(state: TrackerState, event) -> TrackerState:
    """Apply one recorded update event; untouched components are unchanged.

    ``event`` is ``(ell, gamma, j, cost)`` with ``j`` a state index.
    """
    ell, gamma, j, cost = event
    g = state.g_tilde.copy()
    qh = state.q_hat.copy()
    g[ell] = (1.0 - gamma) * g[ell] + gamma * cost
    qh[ell] *= 1.0 - gamma
    qh[ell, j] += gamma
    return TrackerState(g, qh)


def run_trackers(m: GameModel, run: QLearnRun, check_support: bool = True) -> TrackerState:
    """Fold a recorded run through the trackers (batch form of the update).

    With ``check_support`` every sampled successor is asserted to lie in the
    support of its kernel row, which together with the initial state makes
    the absolute-continuity invariant hold at every step.
    """
    if run.events is None:
        raise ValueError("run was not recorded with full history")
    ev = run.events
    g = run.q0 * 0.0
    g = g.tolist()
    qh = [row.tolist() for row in m.P]
    support = [set(s[0]) for s in m._succ]
    for k in range(len(ev)):
        ell = int(ev.ell[k])
        gamma = float(ev.gamma[k])
        j = int(ev.j[k])
        if check_support and j not in support[ell]:
            raise AssertionError(f"sampled successor {j} outside kernel support of {m.triplets[ell]}")
        g[ell] = (1.0 - gamma) * g[ell] + gamma * float(ev.cost[k])
        row = qh[ell]
        om = 1.0 - gamma
        for col in range(len(row)):
            row[col] *= om
        row[j] += gamma
    return TrackerState(np.array(g), np.array(qh))


def certificate_to_json_text(cert: ContractionCertificate, m: GameModel) -> str:
    return json.dumps(cert.to_json(m), indent=2)
