"""Totally asynchronous minimax Q-learning on a sampled game.

Each iteration activates a subset of state-control triplets, draws a random
transition for each, and relaxes the triplet's Q-value toward the realized
cost plus the matrix-game value of a *delayed* view of the Q-table at the
successor state.  Components outside the active set carry over bit-exactly.
Nothing here reads the model's probabilities except through sampling, so
the engine exercises exactly the information a model-free learner has.

Determinism contract: every random quantity is a pure function of
``(seed, component, counter)`` through the same counter-based hash used by
:func:`sspg.model.sample_transition`.  Transitions use component ``l`` with
the triplet's own update count as counter, delays use component ``|R| + l``,
the scheduler uses component ``2|R|``.  Identical ``(model, config, Q0)``
therefore give bit-identical runs, and recorded runs can be replayed
against coupled processes using literally the same draws.

Delay offsets are attached to ordered component pairs: the active triplet
``l`` reading component ``l~`` at iteration t sees the value from iteration
``t - d(l, count(l), l~)``, where ``d`` is a pure hash bounded by the delay
model (and by t, so no read precedes the start).  Because ``d`` never
depends on the sampled successor, stepsizes and delays are measurable
before the transition draw, as the update-noise analysis requires.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .matgame import flat_game_value, value_2x2
from .model import GameModel, counter_hash, counter_uniform
from .operators import q_bellman


class QLearnDivergenceError(RuntimeError):
    """A Q-value left the floating range; the run is aborted with context."""


def _parse_scheduler(spec):
    if spec == "all":
        return ("all", 0)
    if isinstance(spec, str):
        name, _, arg = spec.partition(":")
        if name in ("uniform-random", "round-robin"):
            return (name, int(arg) if arg else 1)
        raise ValueError(f"unknown scheduler {spec!r}")
    kind = spec[0]
    if kind in ("uniform-random", "round-robin"):
        k = int(spec[1])
        if k < 1:
            raise ValueError("scheduler needs k >= 1")
        return (kind, k)
    if kind == "custom":
        return ("custom", tuple(tuple(int(c) for c in group) for group in spec[1]))
    raise ValueError(f"unknown scheduler {spec!r}")


def _parse_delay(spec):
    if spec == "zero":
        return ("zero", 0)
    if isinstance(spec, str):
        name, _, arg = spec.partition(":")
        if name == "uniform":
            return ("uniform", int(arg))
        raise ValueError(f"unknown delay model {spec!r}")
    kind = spec[0]
    if kind == "uniform":
        d = int(spec[1])
        if d < 0:
            raise ValueError("delay bound must be nonnegative")
        return ("uniform", d)
    if kind == "fixed":
        sched = tuple(int(x) for x in spec[1])
        if not sched or min(sched) < 0:
            raise ValueError("fixed delay schedule must be nonempty and nonnegative")
        return ("fixed", sched)
    raise ValueError(f"unknown delay model {spec!r}")


@dataclass(frozen=True)
class QLearnConfig:
    """Run configuration.

    ``stepsize=(a, b, p)`` gives component stepsize ``a / (b + k)**p``
    (clamped into [0, 1]) at that component's k-th update, so the usual
    divergent-sum / square-summable conditions hold per component under any
    scheduler.  ``p`` must lie in (0.5, 1].

    ``scheduler``: ``"all"``, ``("uniform-random", k)``, ``("round-robin",
    k)`` or ``("custom", groups)`` with explicit component-index groups
    cycled over iterations.  String forms ``"uniform-random:k"`` etc. are
    accepted.  ``delay_model``: ``"zero"``, ``("uniform", D)`` or
    ``("fixed", offsets)`` (offsets cycled by iteration, applied to every
    pair).  The environment variable ``SSPG_SEED`` overrides ``seed``.
    """

    seed: int = 0
    max_iters: int = 10_000
    stepsize: tuple[float, float, float] = (1.0, 1.0, 0.75)
    scheduler: object = "all"
    delay_model: object = "zero"
    reference_q: object = None
    record_full_history: bool = False
    metric_interval: int = 1_000

    def __post_init__(self):
        a, b, p = self.stepsize
        if a <= 0 or b < 0 or not 0.5 < p <= 1.0:
            raise ValueError("stepsize needs a > 0, b >= 0, p in (0.5, 1]")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.metric_interval < 1:
            raise ValueError("metric_interval must be positive")
        _parse_scheduler(self.scheduler)
        _parse_delay(self.delay_model)


@dataclass(frozen=True)
class MetricsRow:
    iteration: int
    sup_dist_to_ref: float | None
    max_abs_q: float
    residual: float


@dataclass
class EventLog:
    """Per-update records, aligned arrays; offsets padded with -1."""

    t: np.ndarray
    ell: np.ndarray
    count: np.ndarray  # update count of ell before this event
    j: np.ndarray  # successor state index, 0 = terminal
    cost: np.ndarray
    gamma: np.ndarray
    new_q: np.ndarray
    offsets: np.ndarray  # (n_events, max_block) int16

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class QLearnRun:
    """Everything needed to audit, replay, and couple a recorded run."""

    config: QLearnConfig
    seed_used: int
    q0: np.ndarray
    q_final: np.ndarray
    counts: np.ndarray
    sum_gamma: np.ndarray
    sum_gamma_sq: np.ndarray
    max_abs_q: float
    metrics: list[MetricsRow]
    events: EventLog | None
    final_ring: tuple[np.ndarray, ...]
    ring_depth: int

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.q0.tobytes())
        h.update(self.q_final.tobytes())
        h.update(self.counts.tobytes())
        if self.events is not None:
            for arr in (self.events.ell, self.events.j, self.events.new_q, self.events.offsets):
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def to_csv(self, path, m: GameModel) -> None:
        """Per-event trace; reference distances recomputed by replaying events."""
        if self.events is None:
            raise ValueError("run was not recorded with full history")
        import csv

        ref = self.config.reference_q
        ref = None if ref is None else np.asarray(ref, dtype=float)
        q = self.q0.copy()
        running_max = float(np.abs(q).max()) if q.size else 0.0
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(
                ["t", "active_component", "j_sample", "cost", "gamma",
                 "max_delay_used", "sup_dist_to_ref", "max_abs_q"]
            )
            ev = self.events
            for k in range(len(ev)):
                q[ev.ell[k]] = ev.new_q[k]
                running_max = max(running_max, abs(float(ev.new_q[k])))
                offs = ev.offsets[k]
                dmax = int(offs.max()) if offs.size and offs.max() >= 0 else 0
                dist = "" if ref is None else repr(float(np.abs(q - ref).max()))
                w.writerow(
                    [int(ev.t[k]), int(ev.ell[k]), int(ev.j[k]), repr(float(ev.cost[k])),
                     repr(float(ev.gamma[k])), dmax, dist, repr(running_max)]
                )


def _delay_words(seed: int, nR: int, ell: int, count: int, js: int, n_states: int, nwords: int) -> list[int]:
    base = (count * (n_states + 1) + js) * 8
    return [counter_hash(seed, nR + ell, base + w) for w in range(nwords)]


def pair_delay_offsets(
    seed: int, nR: int, n_states: int, ell: int, count: int, js: int, block_size: int, dmax: int
) -> list[int]:
    """Uniform delay offsets in [0, dmax] for the components of state ``js``.

    Pure function of its arguments; the engine, the coupled replay, and the
    noise decomposition all evaluate it identically.
    """
    if dmax <= 0:
        return [0] * block_size
    words = _delay_words(seed, nR, ell, count, js, n_states, (block_size + 3) // 4)
    out = []
    for k in range(block_size):
        bits = (words[k >> 2] >> (16 * (k & 3))) & 0xFFFF
        out.append((bits * (dmax + 1)) >> 16)
    return out


def qlearning_update(
    m: GameModel, ell, q_old: float, delayed_view, j, realized_cost: float, gamma: float
) -> float:
    """One-component relaxation toward the sampled one-step target.

    ``delayed_view`` is the (possibly stale) Q-table the update reads;
    only the successor state's block matters.  ``j`` may be a state label or
    index; the terminal state contributes value zero.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    ji = j if isinstance(j, int) else m.state_index(j)
    if ji == 0:
        val = 0.0
    else:
        off, nu, nv = m.state_block(ji)
        q = np.asarray(delayed_view, dtype=float)
        val = flat_game_value(q[off : off + nu * nv].tolist(), nu, nv)
    return (1.0 - gamma) * q_old + gamma * (realized_cost + val)


def run_qlearning(m: GameModel, cfg: QLearnConfig, q0=None) -> tuple[np.ndarray, QLearnRun]:
    """Execute a configured run; returns the final Q-table and the record.

    Raises :class:`QLearnDivergenceError` if any component leaves the
    floating range (misconfiguration or genuine divergence).
    """
    nR = m.n_triplets
    n_states = m.n
    seed = int(os.environ["SSPG_SEED"]) if os.environ.get("SSPG_SEED") else cfg.seed

    sched_kind, sched_arg = _parse_scheduler(cfg.scheduler)
    delay_kind, delay_arg = _parse_delay(cfg.delay_model)
    if delay_kind == "zero":
        depth = 1
    elif delay_kind == "uniform":
        depth = delay_arg + 1
    else:
        depth = max(delay_arg) + 1

    a, b, p = cfg.stepsize
    ref = None if cfg.reference_q is None else np.asarray(cfg.reference_q, dtype=float)

    q0_arr = np.zeros(nR) if q0 is None else np.array(q0, dtype=float)
    if q0_arr.shape != (nR,):
        raise ValueError(f"Q0 needs shape ({nR},)")

    # flat python structures for the hot loop
    succ = m._succ
    blocks = [m.state_block(i) for i in range(1, n_states + 1)]
    block_of = [None] + [list(range(off, off + nu * nv)) for off, nu, nv in blocks]
    shape_of = [None] + [(nu, nv) for _, nu, nv in blocks]
    Q = q0_arr.tolist()
    ring = [Q[:] for _ in range(depth)]
    counts = [0] * nR
    sum_g = [0.0] * nR
    sum_g2 = [0.0] * nR

    record = cfg.record_full_history
    ev_t: list[int] = []
    ev_ell: list[int] = []
    ev_cnt: list[int] = []
    ev_j: list[int] = []
    ev_cost: list[float] = []
    ev_gamma: list[float] = []
    ev_newq: list[float] = []
    ev_offs: list[tuple] = []

    max_abs = float(np.abs(q0_arr).max()) if nR else 0.0
    metrics: list[MetricsRow] = []

    def snap_metrics(t_now: int) -> None:
        q_arr = np.array(Q)
        dist = None if ref is None else float(np.abs(q_arr - ref).max())
        resid = float(np.abs(q_arr - q_bellman(m, q_arr)).max())
        metrics.append(MetricsRow(t_now, dist, max_abs, resid))

    snap_metrics(0)
    sched_comp = 2 * nR
    uniform = counter_uniform
    chash = counter_hash

    for t in range(cfg.max_iters):
        ring[t % depth] = Q[:]

        if sched_kind == "all":
            active = range(nR)
        elif sched_kind == "uniform-random":
            drawn = []
            for r in range(sched_arg):
                h = chash(seed, sched_comp, t * sched_arg + r)
                c = (h * nR) >> 64
                if c not in drawn:
                    drawn.append(c)
            active = drawn
        elif sched_kind == "round-robin":
            active = []
            for r in range(sched_arg):
                c = (t * sched_arg + r) % nR
                if c not in active:
                    active.append(c)
        else:
            active = []
            for c in sched_arg[t % len(sched_arg)]:
                if c not in active:
                    active.append(c)

        if delay_kind == "uniform":
            dmax_iter = delay_arg if delay_arg < t else t
        elif delay_kind == "fixed":
            d_fixed = delay_arg[t % len(delay_arg)]
            dmax_iter = d_fixed if d_fixed < t else t
        else:
            dmax_iter = 0

        for ell in active:
            cnt = counts[ell]
            gamma = a / (b + cnt) ** p if (b + cnt) > 0 else math.inf
            if gamma > 1.0:
                gamma = 1.0
            u = uniform(seed, ell, cnt)
            idx, cum, costs = succ[ell]
            pos = 0
            while cum[pos] < u:
                pos += 1
            j = idx[pos]
            cost = costs[pos]

            if j == 0:
                val = 0.0
                offs = ()
            else:
                comps = block_of[j]
                nu, nv = shape_of[j]
                size = nu * nv
                if dmax_iter == 0:
                    row = ring[t % depth]
                    vals = [row[c] for c in comps]
                    offs = (0,) * size
                elif delay_kind == "fixed":
                    # the scheduled offset itself, applied to every pair
                    row = ring[(t - dmax_iter) % depth]
                    vals = [row[c] for c in comps]
                    offs = (dmax_iter,) * size
                else:
                    base = (cnt * (n_states + 1) + j) * 8
                    dcomp = nR + ell
                    offs_l = []
                    vals = []
                    word = 0
                    for k in range(size):
                        sub = k & 3
                        if sub == 0:
                            word = chash(seed, dcomp, base + (k >> 2))
                        d = (((word >> (16 * sub)) & 0xFFFF) * (dmax_iter + 1)) >> 16
                        offs_l.append(d)
                        vals.append(ring[(t - d) % depth][comps[k]])
                    offs = tuple(offs_l)
                if nu == 1:
                    val = max(vals)
                elif nv == 1:
                    val = min(vals)
                elif size == 4:
                    val = value_2x2(vals[0], vals[1], vals[2], vals[3])
                else:
                    val = flat_game_value(vals, nu, nv)

            new_q = (1.0 - gamma) * Q[ell] + gamma * (cost + val)
            if not math.isfinite(new_q):
                raise QLearnDivergenceError(
                    f"non-finite Q at iteration {t}, component {m.triplets[ell]}"
                )
            Q[ell] = new_q
            counts[ell] = cnt + 1
            sum_g[ell] += gamma
            sum_g2[ell] += gamma * gamma
            if new_q > max_abs:
                max_abs = new_q
            elif -new_q > max_abs:
                max_abs = -new_q
            if record:
                ev_t.append(t)
                ev_ell.append(ell)
                ev_cnt.append(cnt)
                ev_j.append(j)
                ev_cost.append(cost)
                ev_gamma.append(gamma)
                ev_newq.append(new_q)
                ev_offs.append(offs)

        if (t + 1) % cfg.metric_interval == 0 or t + 1 == cfg.max_iters:
            snap_metrics(t + 1)

    events = None
    if record:
        max_block = max((len(o) for o in ev_offs), default=0)
        offs_arr = np.full((len(ev_t), max_block), -1, dtype=np.int16)
        for k, o in enumerate(ev_offs):
            if o:
                offs_arr[k, : len(o)] = o
        events = EventLog(
            t=np.array(ev_t, dtype=np.int64),
            ell=np.array(ev_ell, dtype=np.int32),
            count=np.array(ev_cnt, dtype=np.int64),
            j=np.array(ev_j, dtype=np.int32),
            cost=np.array(ev_cost, dtype=float),
            gamma=np.array(ev_gamma, dtype=float),
            new_q=np.array(ev_newq, dtype=float),
            offsets=offs_arr,
        )

    q_final = np.array(Q)
    run = QLearnRun(
        config=cfg,
        seed_used=seed,
        q0=q0_arr,
        q_final=q_final,
        counts=np.array(counts, dtype=np.int64),
        sum_gamma=np.array(sum_g),
        sum_gamma_sq=np.array(sum_g2),
        max_abs_q=max_abs,
        metrics=metrics,
        events=events,
        final_ring=tuple(np.array(r) for r in ring),
        ring_depth=depth,
    )
    return q_final, run


def _replay_ring_filler(depth: int):
    """Shared ring-buffer advance for event replays (handles iteration gaps)."""

    def fill(ring: list, q: list, t_prev: int, t_new: int) -> None:
        gap = t_new - t_prev
        if gap >= depth:
            for d in range(depth):
                ring[d] = q[:]
        else:
            for tt in range(t_prev + 1, t_new + 1):
                ring[tt % depth] = q[:]

    return fill


def noise_decomposition(run: QLearnRun, m: GameModel) -> np.ndarray:
    """Per-event noise: realized one-step target minus its conditional mean.

    Recomputes, for every recorded update, the sampled target and the exact
    one-step backup of the same delayed view (expected stage cost plus
    probability-weighted successor game values), and returns the
    difference.  The recorded post-update value is re-derived along the way
    and must match bit-exactly, which guards the replay machinery itself.
    """
    if run.events is None:
        raise ValueError("run was not recorded with full history")
    ev = run.events
    nR = m.n_triplets
    n_states = m.n
    depth = run.ring_depth
    seed = run.seed_used
    delay_kind, delay_arg = _parse_delay(run.config.delay_model)

    blocks = [m.state_block(i) for i in range(1, n_states + 1)]
    block_of = [None] + [list(range(off, off + nu * nv)) for off, nu, nv in blocks]
    shape_of = [None] + [(nu, nv) for _, nu, nv in blocks]
    succ = m._succ
    g = m.g
    P = m.P

    Q = run.q0.tolist()
    ring = [Q[:] for _ in range(depth)]
    fill = _replay_ring_filler(depth)
    t_prev = -1

    def delayed_value(ell: int, cnt: int, js: int, t: int, dmax: int) -> float:
        comps = block_of[js]
        nu, nv = shape_of[js]
        size = nu * nv
        if dmax == 0:
            vals = [ring[t % depth][c] for c in comps]
        elif delay_kind == "fixed":
            vals = [ring[(t - dmax) % depth][c] for c in comps]
        else:
            offs = pair_delay_offsets(seed, nR, n_states, ell, cnt, js, size, dmax)
            vals = [ring[(t - offs[k]) % depth][comps[k]] for k in range(size)]
        return flat_game_value(vals, nu, nv)

    w = np.empty(len(ev))
    for k in range(len(ev)):
        t = int(ev.t[k])
        if t != t_prev:
            fill(ring, Q, t_prev, t)
            t_prev = t
        ell = int(ev.ell[k])
        cnt = int(ev.count[k])
        j = int(ev.j[k])
        gamma = float(ev.gamma[k])
        cost = float(ev.cost[k])
        if delay_kind == "uniform":
            dmax = min(delay_arg, t)
        elif delay_kind == "fixed":
            dmax = min(delay_arg[t % len(delay_arg)], t)
        else:
            dmax = 0

        val_j = 0.0 if j == 0 else delayed_value(ell, cnt, j, t, dmax)
        target = cost + val_j
        new_q = (1.0 - gamma) * Q[ell] + gamma * target
        if new_q != ev.new_q[k]:
            raise AssertionError(f"replay mismatch at event {k}: {new_q} != {ev.new_q[k]}")

        backup = float(g[ell])
        for js in succ[ell][0]:
            if js != 0:
                backup += float(P[ell, js]) * delayed_value(ell, cnt, js, t, dmax)
        w[k] = target - backup
        Q[ell] = new_q
    return w
