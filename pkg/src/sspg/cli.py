"""Command-line front end.

Subcommands: validate, matgame, solve-vi, solve-qvi, solve-pi,
evaluate-pair, analyze, sspa-build, certificate, qlearn, couple, gen.
Primary output is JSON on stdout (or ``--out``); ``--csv`` writes
plot-ready trace files.  Exit codes: 0 success, 1 usage error, 2 validation
failure, 3 solver non-convergence, 4 assumption-check violation under
``--strict``.

Every subcommand is deterministic given its flags and seed; the environment
variable ``SSPG_SEED`` overrides ``--seed`` when set.  ``--threads`` caps
worker parallelism; the current implementation computes single-threaded
(results never depend on the flag).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import diagnostics, generate, qlearn, solve, structure
from .matgame import solve_matrix_game
from .operators import values_from_q
from .model import (
    GameModel,
    ModelFormatError,
    ModelValidationError,
    PolicyMismatchError,
    StationaryPolicy,
    load_model,
    policy_from_json,
    save_model,
    uniform_policy,
    validate_model,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_NO_CONVERGENCE = 3
EXIT_ASSUMPTION = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _resolve_seed(seed: int) -> int:
    env = os.environ.get("SSPG_SEED")
    return int(env) if env else seed


def _read_model(path: str) -> GameModel:
    with open(path) as f:
        return load_model(f.read())


def _read_policy(m: GameModel, path: str) -> StationaryPolicy:
    with open(path) as f:
        return policy_from_json(m, json.load(f))


def _emit(doc, args) -> None:
    text = json.dumps(doc, indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def _values_doc(m: GameModel, values) -> dict:
    return {s: float(v) for s, v in zip(m.states, values)}


def _q_doc(m: GameModel, q) -> list:
    return [
        {"i": i, "u": u, "v": v, "q": float(x)} for (i, u, v), x in zip(m.triplets, q)
    ]


def _add_common(p: argparse.ArgumentParser, model: bool = True) -> None:
    if model:
        p.add_argument("--model", required=True, help="game file (JSON)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--out", help="write primary JSON output here instead of stdout")
    p.add_argument("--csv", help="write trace CSV here")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--threads", type=int, default=1)


def _add_qlearn_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--stepsize", default="1,1,0.75", help="a,b,p")
    p.add_argument("--scheduler", default="uniform-random:1")
    p.add_argument("--delay", type=int, default=0, help="uniform delay bound D (0 = no delays)")
    p.add_argument("--delay-schedule", help="CSV of fixed delay offsets, one per line")
    p.add_argument("--ref", help="reference Q* file (JSON list as emitted by solve-qvi)")
    p.add_argument("--metric-interval", type=int, default=1000)
    p.add_argument("--record", action="store_true", help="record full event history")
    p.add_argument("--config", help="JSON config file; its entries override the flags")


def build_parser() -> _Parser:
    top = _Parser(prog="sspg", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("validate", help="check a game file against the model invariants")
    _add_common(p)

    p = sub.add_parser("matgame", help="solve a zero-sum matrix game")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--matrix", help="inline JSON matrix, e.g. [[1,-1],[-1,1]]")
    group.add_argument("--file", help="JSON file holding the matrix")
    _add_common(p, model=False)

    for name, help_text in (
        ("solve-vi", "value iteration on state values (with fixed-point refinement)"),
        ("solve-qvi", "value iteration on the Q-table"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    p = sub.add_parser("solve-pi", help="policy iteration for one player")
    _add_common(p)
    p.add_argument("--player", choices=["I", "II"], default="I")
    p.add_argument("--start", help="start policy JSON (default: uniform)")
    p.add_argument("--max-outer", type=int, default=50)

    p = sub.add_parser("evaluate-pair", help="classify the chain of a policy pair")
    _add_common(p)
    p.add_argument("--mu", required=True, help="player-I policy JSON")
    p.add_argument("--nu", required=True, help="player-II policy JSON")

    p = sub.add_parser("analyze", help="check the structural game assumptions")
    _add_common(p)

    p = sub.add_parser("sspa-build", help="induced single-player problem for a fixed player-II policy")
    _add_common(p)
    p.add_argument("--nu", help="player-II policy JSON (default: uniform)")

    p = sub.add_parser("certificate", help="weighted sup-norm contraction certificate")
    _add_common(p)
    p.add_argument("--nu", help="proper player-II policy JSON (default: uniform)")

    p = sub.add_parser("qlearn", help="run asynchronous Q-learning")
    _add_common(p)
    _add_qlearn_flags(p)

    p = sub.add_parser("couple", help="run Q-learning and replay its coupled lower process")
    _add_common(p)
    _add_qlearn_flags(p)
    p.add_argument("--nu", help="player-II policy JSON for the coupling (default: uniform)")

    p = sub.add_parser("gen", help="generate a random game")
    _add_common(p, model=False)
    p.add_argument("--states", type=int, default=3)
    p.add_argument("--max-controls", type=int, default=2)
    p.add_argument("--family", choices=list(generate.FAMILIES), default="contraction")
    p.add_argument("--kappa", type=float, default=0.1, help="termination floor per triplet")
    p.add_argument("--cost-range", default="0,1", help="lo,hi")
    return top


def _qlearn_config(args, m: GameModel) -> qlearn.QLearnConfig:
    a, b, p = (float(x) for x in args.stepsize.split(","))
    if args.delay_schedule:
        with open(args.delay_schedule) as f:
            offsets = tuple(int(line.strip()) for line in f if line.strip())
        delay = ("fixed", offsets)
    elif args.delay > 0:
        delay = ("uniform", args.delay)
    else:
        delay = "zero"
    ref = None
    if args.ref:
        with open(args.ref) as f:
            rows = json.load(f)
        ref = np.empty(m.n_triplets)
        for row in rows:
            ref[m.triplet_index((row["i"], row["u"], row["v"]))] = row["q"]
    kwargs = dict(
        seed=args.seed,
        max_iters=args.iters,
        stepsize=(a, b, p),
        scheduler=args.scheduler,
        delay_model=delay,
        reference_q=ref,
        record_full_history=args.record or args.cmd == "couple",
        metric_interval=args.metric_interval,
    )
    if getattr(args, "config", None):
        with open(args.config) as f:
            doc = json.load(f)
        for key in ("seed", "max_iters", "record_full_history", "metric_interval"):
            if key in doc:
                kwargs[key] = doc[key]
        if "stepsize" in doc:
            kwargs["stepsize"] = tuple(float(x) for x in doc["stepsize"])
        if "scheduler" in doc:
            kwargs["scheduler"] = doc["scheduler"]
        if "delay" in doc:
            kwargs["delay_model"] = ("uniform", int(doc["delay"])) if doc["delay"] else "zero"
    return qlearn.QLearnConfig(**kwargs)


def _cmd_validate(args) -> int:
    with open(args.model) as f:
        text = f.read()
    try:
        m = load_model(text)
    except ModelValidationError as e:
        _emit(e.report.to_json(), args)
        return EXIT_INVALID
    _emit(validate_model(m).to_json(), args)
    return EXIT_OK


def _cmd_matgame(args) -> int:
    if args.matrix:
        matrix = json.loads(args.matrix)
    else:
        with open(args.file) as f:
            matrix = json.load(f)
    sol = solve_matrix_game(matrix)
    _emit(
        {
            "value": sol.value,
            "row_strategy": [float(x) for x in sol.row_strategy],
            "col_strategy": [float(x) for x in sol.col_strategy],
        },
        args,
    )
    return EXIT_OK


def _cmd_solve_vi(args) -> int:
    m = _read_model(args.model)
    values, trace = solve.value_iteration(m, tol=args.tol, max_iter=args.max_iters)
    refined = False
    if trace.outcome == solve.CONVERGED:
        values, refined = solve.refine_fixed_point(m, values)
    if args.csv:
        trace.to_csv(args.csv)
    _emit(
        {
            "values": _values_doc(m, values),
            "outcome": trace.outcome,
            "iterations": len(trace.rows),
            "final_residual": trace.final_residual,
            "refined": refined,
        },
        args,
    )
    return EXIT_OK if trace.outcome == solve.CONVERGED else EXIT_NO_CONVERGENCE


def _cmd_solve_qvi(args) -> int:
    m = _read_model(args.model)
    q, trace = solve.q_value_iteration(m, tol=args.tol, max_iter=args.max_iters)
    if args.csv:
        trace.to_csv(args.csv)
    _emit(
        {
            "q": _q_doc(m, q),
            "values": _values_doc(m, values_from_q(m, q)),
            "outcome": trace.outcome,
            "iterations": len(trace.rows),
            "final_residual": trace.final_residual,
        },
        args,
    )
    return EXIT_OK if trace.outcome == solve.CONVERGED else EXIT_NO_CONVERGENCE


def _cmd_solve_pi(args) -> int:
    m = _read_model(args.model)
    player = 1 if args.player == "I" else 2
    start = _read_policy(m, args.start) if args.start else uniform_policy(m, player)
    values, policies, trace = solve.policy_iteration(
        m, player, start, tol=args.tol, max_outer=args.max_outer
    )
    if args.csv:
        trace.to_csv(args.csv)
    _emit(
        {
            "values": _values_doc(m, values),
            "outcome": trace.outcome,
            "outer_iterations": len(trace.rows),
            "final_residual": trace.final_residual,
            "final_policy": policies[-1].to_json(m),
            "note": trace.note,
        },
        args,
    )
    return EXIT_OK if trace.outcome == solve.CONVERGED else EXIT_NO_CONVERGENCE


def _cmd_evaluate_pair(args) -> int:
    m = _read_model(args.model)
    mu = _read_policy(m, args.mu)
    nu = _read_policy(m, args.nu)
    _emit(solve.evaluate_pair(m, mu, nu).to_json(m), args)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    m = _read_model(args.model)
    report = structure.check_ssp_game_assumption(m)
    _emit(report.to_json(m), args)
    if report.overall == "violated":
        print("assumption check: violated", file=sys.stderr)
        if args.strict:
            return EXIT_ASSUMPTION
    return EXIT_OK


def _cmd_sspa_build(args) -> int:
    m = _read_model(args.model)
    nu = _read_policy(m, args.nu) if args.nu else uniform_policy(m, 2)
    _emit(structure.build_sspa(m, nu).to_json(), args)
    return EXIT_OK


def _cmd_certificate(args) -> int:
    m = _read_model(args.model)
    nu = _read_policy(m, args.nu) if args.nu else uniform_policy(m, 2)
    try:
        cert = diagnostics.build_contraction_certificate(m, nu)
    except diagnostics.ImproperPolicyError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    _emit(cert.to_json(m), args)
    return EXIT_OK


def _cmd_qlearn(args) -> int:
    m = _read_model(args.model)
    cfg = _qlearn_config(args, m)
    q, run = qlearn.run_qlearning(m, cfg)
    if args.csv:
        run.to_csv(args.csv, m)
    last = run.metrics[-1]
    _emit(
        {
            "q": _q_doc(m, q),
            "iterations": cfg.max_iters,
            "events": int(run.counts.sum()),
            "max_abs_q": run.max_abs_q,
            "final_residual": last.residual,
            "final_sup_dist_to_ref": last.sup_dist_to_ref,
            "digest": run.digest(),
        },
        args,
    )
    return EXIT_OK


def _cmd_couple(args) -> int:
    m = _read_model(args.model)
    nu = _read_policy(m, args.nu) if args.nu else uniform_policy(m, 2)
    cfg = _qlearn_config(args, m)
    _, run = qlearn.run_qlearning(m, cfg)
    report = diagnostics.run_coupled_lower_process(m, nu, run)
    if args.csv:
        report.to_csv(args.csv, m)
    _emit(
        {
            "events": len(run.events),
            "violations": len(report.violations),
            "min_margin": float(report.min_margin.min()) if m.n_triplets else 0.0,
            "coupled_final": _q_doc(m, report.qhat_final),
        },
        args,
    )
    return EXIT_OK


def _cmd_gen(args) -> int:
    lo, hi = (float(x) for x in args.cost_range.split(","))
    cfg = generate.GeneratorConfig(
        n_states=args.states,
        max_controls=args.max_controls,
        termination_floor=args.kappa,
        cost_range=(lo, hi),
        family=args.family,
        seed=_resolve_seed(args.seed),
    )
    m = generate.generate_model(cfg)
    text = save_model(m)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


_DISPATCH = {
    "validate": _cmd_validate,
    "matgame": _cmd_matgame,
    "solve-vi": _cmd_solve_vi,
    "solve-qvi": _cmd_solve_qvi,
    "solve-pi": _cmd_solve_pi,
    "evaluate-pair": _cmd_evaluate_pair,
    "analyze": _cmd_analyze,
    "sspa-build": _cmd_sspa_build,
    "certificate": _cmd_certificate,
    "qlearn": _cmd_qlearn,
    "couple": _cmd_couple,
    "gen": _cmd_gen,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if hasattr(args, "seed"):
        args.seed = _resolve_seed(args.seed)
    try:
        return _DISPATCH[args.cmd](args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (ModelFormatError, ModelValidationError, PolicyMismatchError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
