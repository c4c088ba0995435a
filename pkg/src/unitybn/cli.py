"""Command-line surface.

Subcommands: query, crossval, bench-propagation, bench-network.
Reports are JSON by default (``--format csv`` flattens the main table
of each report).  Exit codes: 0 success, 1 usage error, 2 input or
parse error, 3 degenerate model.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from pathlib import Path

from .bench import (
    RunConfig,
    run_bench_network,
    run_bench_propagation,
    run_crossval,
    run_query,
)
from .errors import (
    ConfigurationError,
    DegenerateModelError,
    DomainError,
    DomainMismatchError,
    EngineError,
    IngestionError,
    ParseError,
    QueryError,
)
from .estimation import SmoothingPolicy
from .io import fit, load_dataset, parse_dag, parse_network

USAGE_ERROR = 1
INPUT_ERROR = 2
DEGENERATE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors instead of argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _bool_flag(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {value!r}")


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--network", help="network file (BIF dialect)")
    sub.add_argument("--data", help="data file (delimited text with header)")
    sub.add_argument("--dag", help="structure file (child: parents lines)")
    sub.add_argument("--policy", choices=["mle-unity", "laplace"], default="mle-unity")
    sub.add_argument("--alpha", type=float, default=1.0, help="Laplace pseudo-count")
    sub.add_argument("--epsilon", type=float, default=1.0, help="unity smoothing value")
    sub.add_argument("--up", type=_bool_flag, default=True, help="enable unity propagation shortcuts")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--assign", choices=["first", "smallest"], default="smallest")
    sub.add_argument("--out", help="output path (default: stdout)")
    sub.add_argument("--format", choices=["json", "csv"], default="json")
    sub.add_argument("--delimiter", default=",", help="data file delimiter")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unitybn", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    q = subs.add_parser("query", help="posterior marginals given evidence")
    _add_common(q)
    q.add_argument("--evidence", default="", help="var=level,var=level,...")

    cv = subs.add_parser("crossval", help="q-sweep cross-validated prediction error")
    _add_common(cv)
    cv.add_argument("--class", dest="class_var", required=True, help="class variable name")
    cv.add_argument("--folds", type=int, default=10)
    cv.add_argument("--q-min", type=int, default=None)
    cv.add_argument("--q-max", type=int, default=None)
    cv.add_argument("--q-step", type=int, default=None)

    bp = subs.add_parser(
        "bench-propagation", help="shortcut vs materialized timing over random evidence"
    )
    _add_common(bp)
    bp.add_argument("--reps", type=int, default=200)
    bp.add_argument("--q-min", type=int, default=None)
    bp.add_argument("--q-max", type=int, default=None)
    bp.add_argument("--q-step", type=int, default=None)

    bn_cmd = subs.add_parser(
        "bench-network", help="no-evidence timing driven by unity cliques"
    )
    _add_common(bn_cmd)
    bn_cmd.add_argument("--reps", type=int, default=200)
    return parser


def _parse_evidence(spec: str) -> dict[str, str]:
    out: dict[str, str] = {}
    spec = spec.strip()
    if not spec:
        return out
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ConfigurationError(f"evidence item {chunk!r} is not var=level")
        name, level = chunk.split("=", 1)
        name, level = name.strip(), level.strip()
        if not name or not level:
            raise ConfigurationError(f"evidence item {chunk!r} is not var=level")
        if name in out:
            raise ConfigurationError(f"duplicate evidence for {name!r}")
        out[name] = level
    return out


def _load_model(args):
    policy = SmoothingPolicy(args.policy, alpha=args.alpha, epsilon=args.epsilon)
    if args.network:
        return parse_network(Path(args.network).read_text()), policy
    if args.dag and args.data:
        dag = parse_dag(Path(args.dag).read_text())
        data = load_dataset(Path(args.data).read_text(), delimiter=args.delimiter)
        return fit(dag, data, policy), policy
    raise ConfigurationError("provide --network, or --dag together with --data")


def _config(args, policy: SmoothingPolicy) -> RunConfig:
    return RunConfig(
        policy=policy,
        up_enabled=args.up,
        seed=args.seed,
        q_min=getattr(args, "q_min", None),
        q_max=getattr(args, "q_max", None),
        q_step=getattr(args, "q_step", None),
        folds=getattr(args, "folds", 10),
        repetitions=getattr(args, "reps", 200),
        assign=args.assign,
    )


def _flatten_csv(report: dict) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf)
    command = report["command"]
    if command == "query":
        writer.writerow(["variable", "level", "probability"])
        for name in sorted(report["marginals"]):
            for level, p in report["marginals"][name].items():
                writer.writerow([name, level, repr(p)])
    elif command == "crossval":
        writer.writerow(["q", "error", "degenerate_predictions"])
        for q in report["q_values"]:
            writer.writerow(
                [q, repr(report["errors"][str(q)]), report["degenerate_predictions"][str(q)]]
            )
    elif command == "bench-propagation":
        fields = [
            "q",
            "repetition",
            "mode",
            "elapsed_ns",
            "eta",
            "eta_smoothed",
            "degenerate",
            "partial_multiplications",
            "partial_divisions",
            "projections",
            "avoided_multiplications",
            "avoided_divisions",
        ]
        writer.writerow(fields)
        for record in report["records"]:
            writer.writerow([record.get(f) for f in fields])
    else:  # bench-network
        fields = [
            "cliques",
            "unity_cliques",
            "max_clique_vars",
            "max_unity_clique_vars",
            "time_ratio",
            "counter_ratio",
            "up_performed",
            "noup_performed",
        ]
        writer.writerow(fields)
        tree = report["tree"]
        writer.writerow(
            [
                tree["cliques"],
                tree["unity_cliques"],
                tree["max_clique_vars"],
                tree["max_unity_clique_vars"],
                repr(report["time_ratio"]),
                repr(report["counter_ratio"]),
                report["up_performed"],
                report["noup_performed"],
            ]
        )
    return buf.getvalue()


def _emit(report: dict, args) -> None:
    if args.format == "json":
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        text = _flatten_csv(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _run(args) -> dict:
    if args.command == "query":
        bn, policy = _load_model(args)
        return run_query(bn, _parse_evidence(args.evidence), _config(args, policy))
    if args.command == "crossval":
        if not (args.dag and args.data):
            raise ConfigurationError("crossval needs --dag and --data")
        policy = SmoothingPolicy(args.policy, alpha=args.alpha, epsilon=args.epsilon)
        dag = parse_dag(Path(args.dag).read_text())
        data = load_dataset(Path(args.data).read_text(), delimiter=args.delimiter)
        return run_crossval(dag, data, args.class_var, _config(args, policy))
    if args.command == "bench-propagation":
        bn, policy = _load_model(args)
        return run_bench_propagation(bn, _config(args, policy))
    bn, policy = _load_model(args)
    return run_bench_network(bn, _config(args, policy))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else USAGE_ERROR
    try:
        report = _run(args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return INPUT_ERROR
    except (ParseError, IngestionError, QueryError, DomainError, DomainMismatchError) as e:
        print(f"error: {e}", file=sys.stderr)
        return INPUT_ERROR
    except DegenerateModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return DEGENERATE
    except EngineError as e:  # pragma: no cover - internal bugs surface loudly
        print(f"internal error: {e}", file=sys.stderr)
        return INPUT_ERROR
    _emit(report, args)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
