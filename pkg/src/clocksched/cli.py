"""Command-line front end.

Subcommands mirror the library surface: parse a spec, transform it
into a schedule, emit a schedule as text, verify or analyze a
schedule document, and enumerate a sparse graph.  Schedules travel
between subcommands as JSON documents.
"""

from __future__ import annotations

import argparse
import json
import sys

from .clock import make_clock
from .emit import emit, schedule_from_json, schedule_to_json
from .engine import enumerate_schedule, enumerate_sparse, parse_edge_list
from .formula import SpecSyntaxError, check_legality, parse_spec, print_spec
from .schedule import BuildError, build_schedule, sequential_schedule
from .verify import DEFAULT_SEED, analyze, check_coverage, check_dependencies, equivalent


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def _parse_clock(text: str):
    parts = text.lower().split("x")
    if len(parts) not in (2, 3) or not all(p.isdigit() for p in parts):
        raise argparse.ArgumentTypeError(
            f"clock {text!r} is not K x RATE [x SCALE], like 3x2 or 4x2x2"
        )
    k, rate = int(parts[0]), int(parts[1])
    scale = int(parts[2]) if len(parts) == 3 else 1
    try:
        return make_clock(k, rate, scale)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _parse_map(text: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for chunk in text.split(","):
        name, _, value = chunk.partition("=")
        name = name.strip()
        if not name or not value.strip().isdigit():
            raise argparse.ArgumentTypeError(
                f"mapping chunk {chunk!r} is not NAME=POWER"
            )
        out[name] = int(value)
    return out


def _parse_unfold(text: str) -> tuple[str, int]:
    name, _, value = text.partition("=")
    if not name or not value.isdigit():
        raise argparse.ArgumentTypeError(f"unfold {text!r} is not NAME=COPIES")
    return name, int(value)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clocksched",
        description="restructure map-reduce index spaces over power-of-two clocks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="check a spec and print its canonical form")
    p.add_argument("spec", help="spec file, or - for stdin")
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("transform", help="build a schedule from a spec")
    p.add_argument("spec", help="spec file, or - for stdin")
    p.add_argument("--clock", type=_parse_clock, default=None, metavar="KxRATE[xSCALE]")
    p.add_argument("--map", dest="mapping", type=_parse_map, default=None, metavar="N=8,M=4")
    p.add_argument("--order", default=None, help="comma list of indexes, outermost first")
    p.add_argument("--convolutions", type=int, default=None, metavar="LEVELS")
    p.add_argument("--unfold", type=_parse_unfold, default=None, metavar="NAME=COPIES")
    p.add_argument("--temp-budget", dest="budget", type=int, default=None, metavar="CELLS")
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("emit", help="print a schedule document as loop text")
    p.add_argument("schedule", help="schedule JSON file, or - for stdin")
    p.add_argument("--notation", choices=("for", "form", "enum"), default="for")
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("verify", help="coverage, dependence, and equivalence checks")
    p.add_argument("schedule", help="schedule JSON file, or - for stdin")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    p = sub.add_parser("analyze", help="parallelism and coloring profile")
    p.add_argument("schedule", help="schedule JSON file, or - for stdin")
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("sparse", help="enumerate a sparse graph over a unit clock")
    p.add_argument("edges", help="edge list file (one 'from to' pair per line), or -")
    p.add_argument("--unit", type=_parse_clock, default=None, metavar="KxRATE[xSCALE]")
    p.add_argument("--bfs", action="store_true", help="breadth-first instead of depth-first")
    p.add_argument("-o", "--output", default=None)

    return parser


def _load_tree(path: str):
    return schedule_from_json(json.loads(_read_text(path)))


def _cmd_parse(args) -> int:
    spec = parse_spec(_read_text(args.spec))
    problems = check_legality(spec)
    if problems:
        for line in problems:
            print(f"problem: {line}", file=sys.stderr)
        return 1
    _write_text(args.output, print_spec(spec))
    return 0


def _cmd_transform(args) -> int:
    order = args.order.split(",") if args.order else None
    tree = build_schedule(
        _read_text(args.spec),
        clock=args.clock,
        assignment=args.mapping,
        order=order,
        convolutions=args.convolutions,
        unfold_over=args.unfold,
        budget=args.budget,
    )
    _write_text(args.output, json.dumps(schedule_to_json(tree), indent=2) + "\n")
    return 0


def _cmd_emit(args) -> int:
    _write_text(args.output, emit(_load_tree(args.schedule), args.notation))
    return 0


def _cmd_verify(args) -> int:
    tree = _load_tree(args.schedule)
    trace = enumerate_schedule(tree)
    coverage = check_coverage(trace)
    print(coverage.summary())
    dependencies = check_dependencies(trace)
    print(dependencies.summary())
    ok = coverage.ok and dependencies.ok
    if tree.source is not None or tree.spec is not None:
        reference = sequential_schedule(
            tree.source if tree.source is not None else tree.spec
        )
        eq = equivalent(trace, reference, trials=args.trials, seed=args.seed)
        print(eq.summary())
        ok = ok and eq.ok
    profile = analyze(trace)
    print(f"widths: {list(profile.widths)}")
    print(f"colors: {dict(sorted(profile.colors.items()))}")
    print("verdict:", "pass" if ok else "FAIL")
    return 0 if ok else 1


def _cmd_analyze(args) -> int:
    profile = analyze(enumerate_schedule(_load_tree(args.schedule)))
    _write_text(args.output, json.dumps(profile.to_json(), indent=2) + "\n")
    return 0


def _cmd_sparse(args) -> int:
    graph = parse_edge_list(_read_text(args.edges))
    unit = args.unit if args.unit is not None else make_clock(1)
    records = enumerate_sparse(graph, unit, bfs=args.bfs)
    lines = [
        f"vertex {r.vertex} unit {r.unit_index} slot {r.slot} "
        f"time {r.time_value} color {r.color}"
        for r in records
    ]
    lines.append(f"vertexes {len(records)} units {records[-1].unit_index + 1}")
    _write_text(args.output, "\n".join(lines) + "\n")
    return 0


_COMMANDS = {
    "parse": _cmd_parse,
    "transform": _cmd_transform,
    "emit": _cmd_emit,
    "verify": _cmd_verify,
    "analyze": _cmd_analyze,
    "sparse": _cmd_sparse,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SpecSyntaxError, BuildError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
