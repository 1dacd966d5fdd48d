"""Command-line front end for reproducible experiments.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Output files embed the parameters needed to regenerate them as '# key=value'
comment lines (CSV) or a "params" object (JSON); the timestamp line can be
suppressed with --no-timestamp for byte-exact comparisons.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dynamics, exact, graphs, montecarlo, sweeps
from ._record import format_value, utc_timestamp, write_param_comments
from .errors import NotErgodicError

FIXED_KINDS = ("ring", "path", "complete", "lattice", "edgelist")
TOPOLOGY_KINDS = FIXED_KINDS + ("binomial",)


class UsageError(ValueError):
    """Flag-level validation failure; maps to exit code 2."""


def _add_common(parser: argparse.ArgumentParser, *, trials: bool = False) -> None:
    parser.add_argument("--topology", choices=TOPOLOGY_KINDS, help="graph topology kind")
    parser.add_argument("--nodes", type=int, help="node count")
    parser.add_argument("--p", type=float, help="per-step edge probability (binomial topology)")
    parser.add_argument("--dims", type=str, help="lattice dimensions, e.g. 3x3 or 4x4x4")
    parser.add_argument("--periodic", action="store_true", help="wrap lattice axes")
    parser.add_argument("--edgelist", type=str, help="edge-list file (first line N, then 'i j' lines)")
    parser.add_argument("--eta", type=float, help="noise level (> 0)")
    parser.add_argument("--steps", type=int, help="step count / step budget")
    parser.add_argument("--seed", type=int, help="master seed (default 0)")
    parser.add_argument(
        "--init",
        choices=("random", "all-plus", "all-minus", "file"),
        help="initial state policy",
    )
    parser.add_argument("--init-file", type=str, help="initial state file ('+'/'-' string or +-1 tokens)")
    parser.add_argument("--out", type=str, help="output path (or prefix for 'exact')")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="stdout format where applicable")
    parser.add_argument("--threads", type=int, default=1, help="worker cap; never changes results")
    parser.add_argument("--no-timestamp", action="store_true", help="omit the timestamp field from outputs")
    parser.add_argument("--config", type=str, help="flat key=value file; flags override file values")
    if trials:
        parser.add_argument("--trials", type=int, help="number of independent trials")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    top = argparse.ArgumentParser(
        prog="spinconsensus",
        description="Simulate and exactly analyze noisy bipolar consensus dynamics on graphs.",
    )
    sub = top.add_subparsers(dest="command", metavar="command")
    parsers: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("simulate", help="run one trajectory and export its state sums")
    _add_common(p)
    p.add_argument("--full-state", action="store_true", help="record and export the full state per step")
    parsers["simulate"] = p

    p = sub.add_parser("ensemble", help="run many trials and export mean state sums")
    _add_common(p, trials=True)
    parsers["ensemble"] = p

    p = sub.add_parser("decay", help="estimate the decay rate of the mean state sum (eta > 1)")
    _add_common(p, trials=True)
    p.add_argument("--floor", type=float, default=5.0, help="fit window floor in standard errors")
    parsers["decay"] = p

    p = sub.add_parser("exact", help="build the exact chain; classify, solve, and export it")
    _add_common(p)
    p.add_argument("--verify", action="store_true", help="run the invariant checks and report each")
    parsers["exact"] = p

    p = sub.add_parser("sweep", help="evaluate a metric over a grid of eta (and optionally p)")
    _add_common(p, trials=True)
    p.add_argument("--etas", type=str, help="comma-separated eta grid, e.g. 0.2,0.6,1.0,1.4")
    p.add_argument("--ps", type=str, help="comma-separated p grid (binomial topology)")
    p.add_argument("--metric", choices=sweeps.METRICS, help="metric to evaluate per grid point")
    p.add_argument("--burn-in", type=int, default=1000, help="burn-in steps for final_time_average")
    p.add_argument("--floor", type=float, default=5.0, help="fit window floor for decay_exponent")
    parsers["sweep"] = p

    return top, parsers


def _parse_bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise UsageError(f"config key {key!r}: expected a boolean, got {text!r}")


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv: list[str], path: str) -> None:
    """Fill parsed args from a key=value file; explicit flags keep priority."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc}") from exc

    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"--config {path} line {lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        entries[key.strip()] = value.strip()

    actions = {
        option[2:]: action
        for action in parser._actions
        for option in action.option_strings
        if option.startswith("--")
    }
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token[2:].split("=", 1)[0])

    for key, value in entries.items():
        if key == "config":
            continue
        action = actions.get(key)
        if action is None:
            raise UsageError(f"--config {path}: unknown key {key!r} for this command")
        if key in explicit:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            setattr(args, action.dest, _parse_bool(value, key))
        elif action.type is not None:
            try:
                setattr(args, action.dest, action.type(value))
            except ValueError as exc:
                raise UsageError(f"--config {path}: key {key!r}: {exc}") from exc
        else:
            setattr(args, action.dest, value)
        if action.choices and getattr(args, action.dest) not in action.choices:
            raise UsageError(
                f"--config {path}: key {key!r} must be one of {sorted(action.choices)}"
            )


def _require(args: argparse.Namespace, name: str):
    value = getattr(args, name.replace("-", "_"))
    if value is None:
        raise UsageError(f"--{name} is required for this command")
    return value


def _parse_dims(text: str) -> list[int]:
    tokens = text.replace("x", ",").split(",")
    try:
        return [int(t) for t in tokens if t.strip()]
    except ValueError as exc:
        raise UsageError(f"--dims: expected integers like 3x3, got {text!r}") from exc


def _check_eta(args: argparse.Namespace) -> float:
    eta = _require(args, "eta")
    if eta <= 0:
        raise UsageError("--eta must be > 0")
    return float(eta)


def _build_spec(args: argparse.Namespace, edge_prob: float | None = None) -> graphs.GraphProcessSpec:
    kind = _require(args, "topology")
    if kind == "binomial":
        p = edge_prob if edge_prob is not None else args.p
        if p is None:
            raise UsageError("--p is required for --topology binomial")
        if not 0.0 < p < 1.0:
            raise UsageError("--p must lie strictly between 0 and 1")
        return graphs.build_process_spec(kind, nodes=_require(args, "nodes"), edge_prob=p)
    if kind == "lattice":
        dims = _parse_dims(_require(args, "dims"))
        return graphs.build_process_spec(kind, dims=dims, periodic=args.periodic)
    if kind == "edgelist":
        path = _require(args, "edgelist")
        return graphs.FixedGraphSpec(graphs.load_edge_list(path))
    return graphs.build_process_spec(kind, nodes=_require(args, "nodes"))


def _resolve_init(args: argparse.Namespace, default: str):
    policy = args.init if args.init is not None else default
    if policy != "file":
        return policy
    if args.init_file is None:
        raise UsageError("--init-file is required with --init file")
    text = Path(args.init_file).read_text(encoding="utf-8").strip()
    if set(text) <= {"+", "-"} and text:
        return dynamics.state_from_string(text)
    try:
        return dynamics.make_state([int(t) for t in text.split()])
    except ValueError as exc:
        raise UsageError(f"--init-file {args.init_file}: {exc}") from exc


def _seed(args: argparse.Namespace) -> int:
    return args.seed if args.seed is not None else 0


def _record(args: argparse.Namespace, command: str, **extra) -> dict:
    record: dict = {"command": command}
    for key in ("topology", "nodes", "p", "dims", "periodic", "edgelist"):
        value = getattr(args, key, None)
        if value not in (None, False):
            record[key] = value
    record.update({k: v for k, v in extra.items() if v is not None})
    return record


def _timestamped(record: dict, args: argparse.Namespace) -> dict:
    if not args.no_timestamp:
        record["timestamp"] = utc_timestamp()
    return record


def _write_json(report: dict, args: argparse.Namespace) -> None:
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = _build_spec(args)
    eta = _check_eta(args)
    steps = _require(args, "steps")
    if steps < 1:
        raise UsageError("--steps must be >= 1")
    if args.out is None:
        raise UsageError("--out is required for simulate")
    seed = _seed(args)
    init = _resolve_init(args, "random")

    traj = dynamics.run_trajectory(spec, eta, init, steps, seed, record_states=args.full_state)

    record = _record(
        args,
        "simulate",
        eta=eta,
        steps=steps,
        seed=seed,
        init=init if isinstance(init, str) else "file",
    )
    record = _timestamped(record, args)
    if args.format == "json":
        payload: dict = {"params": record, "sums": [int(s) for s in traj.sums]}
        if traj.absorption is not None:
            payload["absorption"] = {"step": traj.absorption[0], "sign": traj.absorption[1]}
        else:
            payload["absorption"] = None
        if args.full_state:
            payload["states"] = [dynamics.state_to_string(s) for s in traj.states]
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8", newline="")
    else:
        dynamics.write_trajectory_csv(traj, args.out, params=record, full_state=args.full_state)

    n = graphs.spec_n_nodes(spec)
    if traj.absorption is not None:
        k, sign = traj.absorption
        print(f"absorbed at step {k}: state sum {sign * n:+d} (all {'+1' if sign > 0 else '-1'}s)")
    else:
        print(f"not absorbed within {steps} steps; final state sum {int(traj.sums[-1]):+d}")
    print(f"wrote {args.out}")
    return 0


def cmd_ensemble(args: argparse.Namespace) -> int:
    spec = _build_spec(args)
    eta = _check_eta(args)
    steps = _require(args, "steps")
    trials = _require(args, "trials")
    seed = _seed(args)
    init = _resolve_init(args, "random")

    result = montecarlo.run_ensemble(spec, eta, init, steps, trials, seed, n_workers=args.threads)

    record = _record(
        args,
        "ensemble",
        eta=eta,
        steps=steps,
        trials=trials,
        seed=seed,
        init=init if isinstance(init, str) else "file",
    )
    record = _timestamped(record, args)
    if args.format == "json":
        payload = {
            "params": record,
            "mean_sums": [float(x) for x in result.mean_sums],
            "stderr_sums": [float(x) for x in result.stderr_sums],
        }
        _write_json(payload, args)
    elif args.out:
        montecarlo.write_ensemble_csv(result, args.out, params=record)
    else:
        montecarlo.write_ensemble_csv(result, sys.stdout, params=record)
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_decay(args: argparse.Namespace) -> int:
    if args.topology is None:
        args.topology = "binomial"
    spec = _build_spec(args)
    eta = _check_eta(args)
    if eta <= 1.0:
        raise UsageError("--eta must exceed 1 for decay estimation (the mean sum does not decay below)")
    steps = _require(args, "steps")
    trials = _require(args, "trials")
    seed = _seed(args)
    init = _resolve_init(args, "all-plus")

    result = montecarlo.run_ensemble(spec, eta, init, steps, trials, seed, n_workers=args.threads)
    estimate = montecarlo.estimate_decay_exponent(result, floor=args.floor)

    record = _record(
        args,
        "decay",
        eta=eta,
        steps=steps,
        trials=trials,
        seed=seed,
        init=init if isinstance(init, str) else "file",
        floor=args.floor,
    )
    report = montecarlo.decay_report(estimate, result)
    report["params"] = _timestamped(record, args)
    _write_json(report, args)
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_exact(args: argparse.Namespace) -> int:
    kind = _require(args, "topology")
    eta = _check_eta(args)
    spec = _build_spec(args)
    if isinstance(spec, graphs.BinomialGraphSpec):
        matrix = exact.transition_matrix_binomial(spec.n_nodes, spec.edge_prob, eta)
        edge_prob = spec.edge_prob
    else:
        matrix = exact.transition_matrix_fixed(spec.graph, eta)
        edge_prob = None
    n = graphs.spec_n_nodes(spec)

    classification = exact.classify_states(matrix)
    stationary = None
    stationary_error = None
    try:
        stationary = exact.stationary_distribution(matrix)
    except NotErgodicError as exc:
        stationary_error = str(exc)
    expected = exact.expected_sum_step(matrix)
    checks = exact.matrix_checks(matrix, eta, edge_prob) if args.verify else None

    prefix = args.out if args.out else "exact"
    matrix_csv = f"{prefix}_matrix.csv"
    matrix_json = f"{prefix}_matrix.json"
    analysis_json = f"{prefix}_analysis.json"

    record = _record(args, "exact", eta=eta, verify=args.verify or None)
    record = _timestamped(record, args)

    exact.write_matrix_csv(matrix, matrix_csv)
    exact.write_matrix_envelope(
        matrix_json, n, eta, edge_prob, extra={"matrix_csv": matrix_csv, "params": record}
    )
    analysis = {
        "params": record,
        "n_states": matrix.shape[0],
        "classification": {
            "absorbing": sorted(classification.absorbing),
            "transient": sorted(classification.transient),
            "recurrent_nonabsorbing": sorted(classification.recurrent_nonabsorbing),
        },
        "stationary": None if stationary is None else [float(x) for x in stationary],
        "stationary_error": stationary_error,
        "expected_sum_step": [float(x) for x in expected],
    }
    if checks is not None:
        analysis["checks"] = checks
    Path(analysis_json).write_text(json.dumps(analysis, indent=2) + "\n", encoding="utf-8", newline="")

    print(
        f"{kind} chain on {n} nodes, eta={format_value(eta)}: "
        f"{len(classification.absorbing)} absorbing, "
        f"{len(classification.transient)} transient, "
        f"{len(classification.recurrent_nonabsorbing)} recurrent non-absorbing"
    )
    if stationary_error:
        print(f"stationary distribution: unavailable ({stationary_error})")
    failed = 0
    if checks is not None:
        for check in checks:
            status = "PASS" if check["passed"] else "FAIL"
            print(
                f"{status} {check['check']}: max error {check['max_error']:.3g} "
                f"(tolerance {check['tolerance']:.0e})"
            )
            failed += not check["passed"]
    print(f"wrote {matrix_csv}, {matrix_json}, {analysis_json}")
    return 1 if failed else 0


def cmd_sweep(args: argparse.Namespace) -> int:
    metric = _require(args, "metric")
    if not args.etas or not args.etas.strip():
        raise UsageError("--etas must provide a non-empty grid")
    try:
        etas = [float(t) for t in args.etas.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"--etas: {exc}") from exc
    if not etas:
        raise UsageError("--etas must provide a non-empty grid")
    ps = None
    if args.ps:
        try:
            ps = [float(t) for t in args.ps.split(",") if t.strip()]
        except ValueError as exc:
            raise UsageError(f"--ps: {exc}") from exc
        if args.topology != "binomial":
            raise UsageError("--ps is only valid with --topology binomial")

    steps = _require(args, "steps")
    trials = _require(args, "trials")
    seed = _seed(args)
    # Validate the topology flags once up front (p varies per point).
    _build_spec(args, edge_prob=ps[0] if ps else None)
    if args.init == "file":
        raise UsageError("--init file is not supported for sweep")
    init = args.init

    points = sweeps.run_sweep(
        lambda p: _build_spec(args, edge_prob=p),
        etas,
        ps,
        metric,
        steps=steps,
        trials=trials,
        master_seed=seed,
        burn_in=args.burn_in,
        init=init,
        floor=args.floor,
        n_workers=args.threads,
    )

    record = _record(
        args,
        "sweep",
        metric=metric,
        etas=args.etas,
        ps=args.ps,
        steps=steps,
        trials=trials,
        seed=seed,
        init=init,
    )
    record = _timestamped(record, args)

    if args.format == "json":
        payload = {
            "params": record,
            "points": [
                {
                    "eta": pt.eta,
                    "p": pt.edge_prob,
                    "metric": pt.metric,
                    "value": pt.value,
                    "uncertainty": pt.uncertainty,
                }
                for pt in points
            ],
        }
        _write_json(payload, args)
        if args.out:
            print(f"wrote {args.out}")
        return 0

    def emit(f) -> None:
        write_param_comments(f, record)
        f.write("eta,p,metric,value,uncertainty\n")
        for pt in points:
            p_text = "" if pt.edge_prob is None else repr(pt.edge_prob)
            f.write(f"{pt.eta!r},{p_text},{pt.metric},{pt.value!r},{pt.uncertainty!r}\n")

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            emit(f)
        print(f"wrote {args.out}")
    else:
        emit(sys.stdout)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "decay": cmd_decay,
    "exact": cmd_exact,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    top, parsers = build_parser()
    args = top.parse_args(argv)
    if args.command is None:
        top.print_usage(sys.stderr)
        return 2
    try:
        if args.config:
            _apply_config(parsers[args.command], args, argv, args.config)
        return COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
