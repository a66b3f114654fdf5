"""Finite two-player zero-sum stochastic shortest path game models.

A game lives on states ``"1" .. "n"`` plus an implicit cost-free absorbing
termination state ``"0"`` (never stored).  At each state the minimizing
player (player 1) picks a control from a finite set ``U(i)`` and the
maximizing player (player 2) picks from ``V(i)``; the pair ``(u, v)``
determines a probability vector over successors in ``S ∪ {0}`` and a
transition cost for every successor with positive probability.

Internally, state-control triplets ``(i, u, v)`` are enumerated in a fixed
canonical order (state order, then ``U(i)`` order, then ``V(i)`` order);
that index set is used by the Q-table code throughout the package.  Control
labels are strings and list order is meaningful: it pins the canonical
triplet order, trace columns, and all tie-breaking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

TERMINAL = "0"
PLAYER_MIN = 1
PLAYER_MAX = 2

#: tolerance for probability-vector mass checks; vectors whose mass is off by
#: no more than this are renormalized on load so text round-trips are stable
PROB_TOL = 1e-9


class ModelFormatError(ValueError):
    """Raised when a game document cannot be parsed into a model."""


class ModelValidationError(ValueError):
    """Raised when a parsed game document violates model invariants."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("invalid model:\n" + str(report))


class PolicyMismatchError(ValueError):
    """Raised when a policy does not fit the model or the expected player."""


# ---------------------------------------------------------------------------
# Counter-based random streams
# ---------------------------------------------------------------------------

_M64 = (1 << 64) - 1


def _mix64(z: int) -> int:
    z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCD & _M64
    z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53 & _M64
    return z ^ (z >> 33)


def counter_hash(seed: int, component: int, counter: int) -> int:
    """64-bit hash of (seed, component, counter); pure and platform-stable."""
    h = _mix64((seed & _M64) ^ 0x9E3779B97F4A7C15)
    h = _mix64(h ^ (component & _M64))
    h = _mix64(h ^ (counter & _M64))
    return h


def counter_uniform(seed: int, component: int, counter: int) -> float:
    """Uniform draw in [0, 1) determined entirely by (seed, component, counter)."""
    return (counter_hash(seed, component, counter) >> 11) * 2.0**-53


@dataclass(frozen=True)
class RandomStream:
    """Counter-based generator state.

    Output is a pure function of ``(seed, component, counter)``, so any
    consumer can replay a draw bit-identically from the same coordinates.
    Streams are immutable values; drawing returns an advanced copy.
    """

    seed: int
    component: int = 0
    counter: int = 0

    def uniform(self) -> tuple[float, "RandomStream"]:
        return counter_uniform(self.seed, self.component, self.counter), self.advance()

    def advance(self, n: int = 1) -> "RandomStream":
        return RandomStream(self.seed, self.component, self.counter + n)


# ---------------------------------------------------------------------------
# The game model
# ---------------------------------------------------------------------------

Triplet = tuple[str, str, str]
NextEntry = tuple[str, float, float]  # (successor label, probability, cost)


class GameModel:
    """Immutable finite SSP game.

    Parameters
    ----------
    states:
        Non-terminal state labels in order.  ``"0"`` is reserved for the
        termination state and must not appear.
    controls1, controls2:
        Ordered control label lists per state for the minimizer / maximizer.
    transitions:
        Mapping ``(i, u, v) -> sequence of (j, p, cost)`` rows.  Successor
        entries are stored in canonical order (terminal first, then state
        order).  Construction is permissive about probability mass and
        missing rows so that :func:`validate_model` can report findings;
        downstream operators assume a validated model.
    """

    def __init__(
        self,
        states: Sequence[str],
        controls1: Mapping[str, Sequence[str]],
        controls2: Mapping[str, Sequence[str]],
        transitions: Mapping[Triplet, Sequence[NextEntry]],
    ):
        states = tuple(str(s) for s in states)
        if TERMINAL in states:
            raise ModelFormatError('termination state "0" must not appear in "states"')
        if len(set(states)) != len(states):
            raise ModelFormatError("duplicate state labels")
        self.states = states
        self.controls1 = {s: tuple(controls1.get(s, ())) for s in states}
        self.controls2 = {s: tuple(controls2.get(s, ())) for s in states}
        for s in states:
            for labels in (self.controls1[s], self.controls2[s]):
                if len(set(labels)) != len(labels):
                    raise ModelFormatError(f"duplicate control labels at state {s}")

        self._sidx = {TERMINAL: 0}
        for k, s in enumerate(states):
            self._sidx[s] = k + 1
        self.n = len(states)

        # canonical triplet enumeration
        trips: list[Triplet] = []
        blocks: list[tuple[int, int, int]] = []  # (offset, nu, nv) per state
        for s in states:
            us, vs = self.controls1[s], self.controls2[s]
            blocks.append((len(trips), len(us), len(vs)))
            for u in us:
                for v in vs:
                    trips.append((s, u, v))
        self.triplets = tuple(trips)
        self.n_triplets = len(trips)
        self._blocks = tuple(blocks)
        self._tidx = {t: k for k, t in enumerate(trips)}

        rows: dict[Triplet, tuple[NextEntry, ...]] = {}
        P = np.zeros((self.n_triplets, self.n + 1))
        C = np.zeros((self.n_triplets, self.n + 1))
        for key, entries in transitions.items():
            key = (str(key[0]), str(key[1]), str(key[2]))
            if key not in self._tidx:
                raise ModelFormatError(f"transition row for unknown triplet {key}")
            canon = []
            for j, p, cost in entries:
                j = str(j)
                if j not in self._sidx:
                    raise ModelFormatError(f"unknown successor {j!r} in row {key}")
                canon.append((j, float(p), float(cost)))
            canon.sort(key=lambda e: self._sidx[e[0]])
            if len({e[0] for e in canon}) != len(canon):
                raise ModelFormatError(f"duplicate successor entries in row {key}")
            rows[key] = tuple(canon)
            k = self._tidx[key]
            for j, p, cost in canon:
                P[k, self._sidx[j]] = p
                C[k, self._sidx[j]] = cost
        self.transitions = {t: rows.get(t, ()) for t in trips}

        P.setflags(write=False)
        C.setflags(write=False)
        self._P = P
        self._C = C
        g = (P * C).sum(axis=1)
        g.setflags(write=False)
        self._g = g

        # per-triplet sampling tables (support successors only)
        succ = []
        for k in range(self.n_triplets):
            idx = np.flatnonzero(P[k] > 0.0)
            cum = np.cumsum(P[k, idx])
            succ.append((tuple(int(i) for i in idx), tuple(cum), tuple(C[k, idx])))
        self._succ = tuple(succ)

    # -- accessors ----------------------------------------------------------

    @property
    def P(self) -> np.ndarray:
        """Transition matrix over triplets, shape (|R|, n+1); column 0 is terminal."""
        return self._P

    @property
    def C(self) -> np.ndarray:
        """Transition costs aligned with :attr:`P` (zero where p is zero)."""
        return self._C

    @property
    def g(self) -> np.ndarray:
        """Expected stage cost per triplet."""
        return self._g

    def state_index(self, label: str) -> int:
        """Internal index of a state label (terminal is 0, states are 1..n)."""
        try:
            return self._sidx[label]
        except KeyError:
            raise ValueError(f"unknown state {label!r}") from None

    def state_label(self, index: int) -> str:
        return TERMINAL if index == 0 else self.states[index - 1]

    def triplet_index(self, t: Triplet) -> int:
        try:
            return self._tidx[tuple(t)]
        except KeyError:
            raise ValueError(f"unknown state-control triplet {tuple(t)!r}") from None

    def state_block(self, label_or_index: str | int) -> tuple[int, int, int]:
        """(offset, |U(i)|, |V(i)|) of a state's triplet block; u-major layout."""
        i = label_or_index if isinstance(label_or_index, int) else self.state_index(label_or_index)
        if not 1 <= i <= self.n:
            raise ValueError(f"state index {i} out of range")
        return self._blocks[i - 1]

    def q_block(self, q: np.ndarray, state: str | int) -> np.ndarray:
        """View of a Q-table restricted to one state, shaped (|U(i)|, |V(i)|)."""
        off, nu, nv = self.state_block(state)
        return np.asarray(q)[off : off + nu * nv].reshape(nu, nv)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GameModel)
            and self.states == other.states
            and self.controls1 == other.controls1
            and self.controls2 == other.controls2
            and self.transitions == other.transitions
        )

    def __repr__(self) -> str:
        return f"GameModel(n_states={self.n}, n_triplets={self.n_triplets})"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    code: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.location}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not self.findings

    def __str__(self) -> str:
        return "\n".join(str(f) for f in self.findings) if self.findings else "ok"

    def to_json(self) -> dict:
        return {
            "valid": self.ok,
            "findings": [
                {"code": f.code, "location": f.location, "message": f.message}
                for f in self.findings
            ],
        }


def validate_model(m: GameModel) -> ValidationReport:
    """Check every model invariant and report all violations.

    Never raises: an empty report means the model is valid.
    """
    found: list[Finding] = []
    for s in m.states:
        if not m.controls1[s]:
            found.append(Finding("empty-controls", f"state {s}", "empty control set for player 1"))
        if not m.controls2[s]:
            found.append(Finding("empty-controls", f"state {s}", "empty control set for player 2"))
    for t in m.triplets:
        loc = f"({t[0]},{t[1]},{t[2]})"
        row = m.transitions[t]
        if not row:
            found.append(Finding("missing-row", loc, "no transition row"))
            continue
        mass = 0.0
        for j, p, cost in row:
            if not math.isfinite(p) or p < 0.0:
                found.append(Finding("bad-probability", loc, f"probability {p} to {j}"))
                continue
            if p == 0.0:
                found.append(
                    Finding("cost-on-zero-edge", loc, f"cost defined on zero-probability edge to {j}")
                )
            if not math.isfinite(cost):
                found.append(Finding("bad-cost", loc, f"non-finite cost {cost} to {j}"))
            mass += p
        if abs(mass - 1.0) > PROB_TOL:
            found.append(Finding("bad-mass", loc, f"probability mass {mass:.12g}"))
    return ValidationReport(tuple(found))


# ---------------------------------------------------------------------------
# Model operations
# ---------------------------------------------------------------------------


def expected_stage_cost(m: GameModel, t: Triplet) -> float:
    """Expected one-stage cost at triplet ``t``: sum_j p_ij(u,v) * cost(i,u,v,j)."""
    return float(m.g[m.triplet_index(t)])


def sample_transition(
    m: GameModel, t: Triplet, stream: RandomStream
) -> tuple[str, float, RandomStream]:
    """Draw a successor state and realized cost for one transition.

    Returns ``(j, cost, advanced_stream)`` with ``j in S ∪ {"0"}``.  The draw
    is a pure function of the stream coordinates, so identical streams give
    identical outputs.
    """
    k = m.triplet_index(t)
    u, nxt = stream.uniform()
    idx, cum, costs = m._succ[k]
    if not idx:
        raise ValueError(f"triplet {t} has no transition row")
    pos = 0
    while cum[pos] < u:
        pos += 1
    return m.state_label(idx[pos]), costs[pos], nxt


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _parse_entries(raw, loc: str) -> list[NextEntry]:
    if not isinstance(raw, list):
        raise ModelFormatError(f'{loc}: "next" must be a list')
    out = []
    for k, e in enumerate(raw):
        if not isinstance(e, dict) or not {"j", "p", "cost"} <= set(e):
            raise ModelFormatError(f'{loc}: entry {k} needs fields "j", "p", "cost"')
        out.append((str(e["j"]), float(e["p"]), float(e["cost"])))
    return out


def load_model(text: str) -> GameModel:
    """Parse a game document, renormalize near-unit probability rows, validate.

    Raises :class:`ModelFormatError` on structural problems (with field
    context) and :class:`ModelValidationError` listing every violated
    invariant otherwise.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("document root must be an object")
    for field_name in ("states", "controls1", "controls2", "transitions"):
        if field_name not in doc:
            raise ModelFormatError(f'missing field "{field_name}"')
    states = [str(s) for s in doc["states"]]
    if TERMINAL in states:
        raise ModelFormatError('termination state "0" must not appear in "states"')
    controls1 = {str(k): [str(c) for c in v] for k, v in doc["controls1"].items()}
    controls2 = {str(k): [str(c) for c in v] for k, v in doc["controls2"].items()}
    for name, ctrl in (("controls1", controls1), ("controls2", controls2)):
        for s in states:
            if s not in ctrl:
                raise ModelFormatError(f'"{name}" has no entry for state {s}')

    transitions: dict[Triplet, list[NextEntry]] = {}
    for k, row in enumerate(doc["transitions"]):
        if not isinstance(row, dict) or not {"i", "u", "v", "next"} <= set(row):
            raise ModelFormatError(f'transitions[{k}]: needs fields "i", "u", "v", "next"')
        key = (str(row["i"]), str(row["u"]), str(row["v"]))
        loc = f"transitions[{k}] ({key[0]},{key[1]},{key[2]})"
        if key in transitions:
            raise ModelFormatError(f"{loc}: duplicate transition row")
        entries = _parse_entries(row["next"], loc)
        mass = sum(p for _, p, _ in entries)
        if math.isfinite(mass) and mass > 0 and abs(mass - 1.0) <= PROB_TOL:
            entries = [(j, p / mass, c) for j, p, c in entries]
        transitions[key] = entries

    model = GameModel(states, controls1, controls2, transitions)
    report = validate_model(model)
    if not report.ok:
        raise ModelValidationError(report)
    return model


def save_model(m: GameModel) -> str:
    """Serialize to the canonical game document; inverse of :func:`load_model`."""
    doc = {
        "states": list(m.states),
        "controls1": {s: list(m.controls1[s]) for s in m.states},
        "controls2": {s: list(m.controls2[s]) for s in m.states},
        "transitions": [
            {
                "i": i,
                "u": u,
                "v": v,
                "next": [{"j": j, "p": p, "cost": c} for j, p, c in m.transitions[(i, u, v)]],
            }
            for (i, u, v) in m.triplets
        ],
    }
    return json.dumps(doc, indent=2)


def load_bundled_model(name: str) -> GameModel:
    """Load one of the example games shipped with the package.

    Available names: ``everett``, ``zerocost``, ``pursuit``.
    """
    text = resources.files("sspg").joinpath("data", f"{name}.json").read_text()
    return load_model(text)


# ---------------------------------------------------------------------------
# Decision rules and stationary policies
# ---------------------------------------------------------------------------


def decision_rule(probs: Iterable[float]) -> np.ndarray:
    """A probability vector over one state's control list."""
    r = np.asarray(list(probs), dtype=float)
    if r.ndim != 1 or r.size == 0 or (r < 0).any() or abs(r.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"not a probability vector: {r}")
    return r


@dataclass(frozen=True)
class StationaryPolicy:
    """One player's stationary randomized policy: a decision rule per state.

    ``rules[s]`` is a probability vector aligned with the player's control
    list at state ``s`` (player 1: ``controls1``, player 2: ``controls2``).
    """

    player: int
    rules: Mapping[str, np.ndarray]

    def rule(self, state: str) -> np.ndarray:
        return self.rules[state]

    def to_json(self, m: GameModel) -> dict:
        ctrl = m.controls1 if self.player == PLAYER_MIN else m.controls2
        return {
            "player": "I" if self.player == PLAYER_MIN else "II",
            "rules": {
                s: {c: float(p) for c, p in zip(ctrl[s], self.rules[s])} for s in m.states
            },
        }


def policy_from_json(m: GameModel, doc: Mapping) -> StationaryPolicy:
    player = {"I": PLAYER_MIN, "II": PLAYER_MAX, 1: PLAYER_MIN, 2: PLAYER_MAX}.get(doc.get("player"))
    if player is None:
        raise PolicyMismatchError('policy "player" must be "I" or "II"')
    ctrl = m.controls1 if player == PLAYER_MIN else m.controls2
    rules = {}
    for s in m.states:
        if s not in doc.get("rules", {}):
            raise PolicyMismatchError(f"policy has no rule for state {s}")
        table = doc["rules"][s]
        rules[s] = decision_rule(float(table.get(c, 0.0)) for c in ctrl[s])
    return StationaryPolicy(player, rules)


def uniform_policy(m: GameModel, player: int) -> StationaryPolicy:
    ctrl = m.controls1 if player == PLAYER_MIN else m.controls2
    return StationaryPolicy(
        player, {s: np.full(len(ctrl[s]), 1.0 / len(ctrl[s])) for s in m.states}
    )


def pure_policy(m: GameModel, player: int, picks: Mapping[str, str]) -> StationaryPolicy:
    """Deterministic policy given a control label per state."""
    ctrl = m.controls1 if player == PLAYER_MIN else m.controls2
    rules = {}
    for s in m.states:
        r = np.zeros(len(ctrl[s]))
        try:
            r[ctrl[s].index(picks[s])] = 1.0
        except (KeyError, ValueError):
            raise PolicyMismatchError(f"no control {picks.get(s)!r} for state {s}") from None
        rules[s] = r
    return StationaryPolicy(player, rules)


def policy_arrays(m: GameModel, policy: StationaryPolicy, player: int | None = None) -> list[np.ndarray]:
    """Validated decision rules in state order; raises on any mismatch."""
    if player is not None and policy.player != player:
        raise PolicyMismatchError(f"expected a player-{player} policy, got player {policy.player}")
    if policy.player not in (PLAYER_MIN, PLAYER_MAX):
        raise PolicyMismatchError(f"unknown player {policy.player}")
    ctrl = m.controls1 if policy.player == PLAYER_MIN else m.controls2
    out = []
    for s in m.states:
        if s not in policy.rules:
            raise PolicyMismatchError(f"policy has no rule for state {s}")
        r = np.asarray(policy.rules[s], dtype=float)
        if r.shape != (len(ctrl[s]),):
            raise PolicyMismatchError(
                f"rule at state {s} has {r.size} entries, control set has {len(ctrl[s])}"
            )
        if (r < -PROB_TOL).any() or abs(r.sum() - 1.0) > 1e-6:
            raise PolicyMismatchError(f"rule at state {s} is not a distribution: {r}")
        out.append(r)
    return out
