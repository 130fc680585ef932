"""Brute-force checking of schedules against their specs.

Everything here trusts nothing about the builder.  Coverage compares
the visited index points against the spec's domain one by one.  The
dependency check replays the visit order while tagging every memory
cell with its provenance, so a value consumed after its pre-pass
original was overwritten is caught and named.  Equivalence runs the
schedule and the reference order on identical random stores and
compares the results cell for cell.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping

from .engine import VisitTrace, enumerate_schedule
from .formula import (
    ComputationSpec,
    access_location,
    applicable_formulas,
    domain_points,
    in_bounds,
    infer_shapes,
)
from .schedule import ScheduleTree, TempPlan

DEFAULT_SEED = 0x5EED

Store = dict[str, dict[tuple[int, ...], int]]
Location = tuple[str, tuple[int, ...]]


def zeros(shapes: Mapping[str, tuple[int, ...]]) -> Store:
    store: Store = {}
    for name, shape in shapes.items():
        cells: dict[tuple[int, ...], int] = {}
        def fill(prefix: tuple[int, ...], dims: tuple[int, ...]) -> None:
            if not dims:
                cells[prefix] = 0
                return
            for v in range(dims[0]):
                fill(prefix + (v,), dims[1:])
        fill((), shape)
        store[name] = cells
    return store


def random_store(
    shapes: Mapping[str, tuple[int, ...]], seed: int = DEFAULT_SEED
) -> Store:
    """Independent integer cells in [-99, 99], reproducible by seed."""
    rng = random.Random(seed)
    store = zeros(shapes)
    for name in sorted(store):
        for loc in sorted(store[name]):
            store[name][loc] = rng.randint(-99, 99)
    return store


def copy_store(store: Store) -> Store:
    return {name: dict(cells) for name, cells in store.items()}


def _term_value(
    term, point: Mapping[str, int], read, shapes: Mapping[str, tuple[int, ...]]
) -> int | None:
    """Coefficient times the product of operand cells, or None when an
    operand falls off its array (the term contributes nothing)."""
    value = term.coefficient
    for access in term.accesses:
        loc = access_location(access, point)
        if not in_bounds(loc, shapes[access.name]):
            return None
        value *= read(access, loc)
    return value


def _apply_formula(
    f, point: Mapping[str, int], read, store: Store, shapes
) -> Location | None:
    values = [_term_value(t, point, read, shapes) for t in f.terms]
    kept = [v for v in values if v is not None]
    if not kept:
        return None
    wloc = access_location(f.result, point)
    if not in_bounds(wloc, shapes[f.result.name]):
        return None
    total = sum(kept)
    if f.op == "+=":
        store[f.result.name][wloc] += total
    else:
        store[f.result.name][wloc] = total
    return (f.result.name, wloc)


def reference_interpret(spec: ComputationSpec, store: Store) -> Store:
    """Declaration-order enumeration, formulas in listed order, reads
    from current memory.  This is the meaning a spec is held to."""
    shapes = infer_shapes(spec)
    out = copy_store(store)
    names = spec.index_names()

    def read(access, loc):
        return out[access.name][loc]

    for pt in domain_points(spec):
        point = dict(zip(names, pt))
        for fi in applicable_formulas(spec, point):
            _apply_formula(spec.formulas[fi], point, read, out, shapes)
    return out


def _trace_shapes(trace: VisitTrace) -> dict[str, tuple[int, ...]]:
    """Array shapes for a trace, including epilogue-only arrays."""
    spec = trace.spec
    if spec is None:
        raise ValueError("this trace enumerates bare time, not a spec")
    if trace.tree.epilogue:
        spec = replace(spec, formulas=spec.formulas + tuple(trace.tree.epilogue))
    return infer_shapes(spec)


def interpret(trace: VisitTrace, store: Store) -> Store:
    """Run the schedule's visit order on a store.

    Cells named by a snapshot plan are banked at their first overwrite;
    reads other than an accumulator's own cell prefer the banked
    original, which is exactly the value the reference order would have
    seen.
    """
    spec = trace.spec
    if spec is None:
        raise ValueError("this trace enumerates bare time, not a spec")
    shapes = _trace_shapes(trace)
    out = copy_store(store)
    plan = trace.tree.plan
    marked = set(plan.snapshot_locs) if plan.kind == "snapshot" else set()
    bank: dict[Location, int] = {}

    def run(formulas, point):
        for f in formulas:
            wname = f.result.name
            wloc = access_location(f.result, point)

            def read(access, loc, _wloc=wloc, _wname=wname, _op=f.op):
                if _op == "+=" and access.name == _wname and loc == _wloc:
                    return out[access.name][loc]
                return bank.get((access.name, loc), out[access.name][loc])

            if (wname, wloc) in marked and (wname, wloc) not in bank:
                if in_bounds(wloc, shapes[wname]):
                    bank[(wname, wloc)] = out[wname][wloc]
            _apply_formula(f, point, read, out, shapes)

    for r in trace.records:
        if r.epilogue:
            run(trace.tree.epilogue, {})
            continue
        point = dict(zip(trace.names, r.lattice_point))
        run(
            [spec.formulas[i] for i in applicable_formulas(spec, point)],
            point,
        )
    return out


# ---------------------------------------------------------------------------
# coverage

@dataclass(frozen=True)
class CoverageReport:
    ok: bool
    expected: int
    visited: int
    missing: tuple[tuple[int, ...], ...] = ()
    duplicated: tuple[tuple[int, ...], ...] = ()
    extra: tuple[tuple[int, ...], ...] = ()

    def summary(self) -> str:
        if self.ok:
            return f"coverage: ok ({self.visited} points, each exactly once)"
        parts = []
        if self.missing:
            parts.append(f"missing {len(self.missing)} (first {self.missing[0]})")
        if self.duplicated:
            parts.append(
                f"duplicated {len(self.duplicated)} (first {self.duplicated[0]})"
            )
        if self.extra:
            parts.append(f"outside domain {len(self.extra)} (first {self.extra[0]})")
        return "coverage: FAIL, " + ", ".join(parts)


def check_coverage(trace: VisitTrace) -> CoverageReport:
    """Every domain point exactly once, nothing outside the domain."""
    spec = trace.spec
    if spec is None:
        raise ValueError("coverage needs a spec-driven trace")
    wanted = Counter(domain_points(spec))
    got = Counter(r.lattice_point for r in trace.records if not r.epilogue)
    missing = tuple(sorted(p for p in wanted if p not in got))
    duplicated = tuple(sorted(p for p, n in got.items() if p in wanted and n > 1))
    extra = tuple(sorted(p for p in got if p not in wanted))
    ok = not missing and not duplicated and not extra
    return CoverageReport(
        ok=ok,
        expected=sum(wanted.values()),
        visited=sum(got.values()),
        missing=missing,
        duplicated=duplicated,
        extra=extra,
    )


# ---------------------------------------------------------------------------
# dependence along the trace

@dataclass(frozen=True)
class DependencyReport:
    ok: bool
    violations: tuple[str, ...]
    commutes: bool  # order differed from the reference but only inside sums
    events: int

    def summary(self) -> str:
        if self.ok:
            note = " (reordered sums commute)" if self.commutes else ""
            return f"dependencies: ok ({self.events} writes checked){note}"
        return f"dependencies: FAIL, {self.violations[0]}"


def _loc_text(loc: Location) -> str:
    return f"{loc[0]}({','.join(str(v) for v in loc[1])})"


_INIT = ("init",)


def check_dependencies(
    trace: VisitTrace, plan: TempPlan | None = None
) -> DependencyReport:
    """Replay the trace tagging each cell with its provenance.

    A read outside an accumulation chain wants the value the cell held
    before the pass; it passes if the cell is untouched or banked by
    the snapshot plan, and is a violation otherwise.  Accumulator cells
    must end up with exactly the reference set of contributions; a
    permuted arrival order is reported as commuting, not failing.
    """
    spec = trace.spec
    if spec is None:
        raise ValueError("dependence checking needs a spec-driven trace")
    if plan is None:
        plan = trace.tree.plan
    shapes = infer_shapes(spec)
    written = {f.result.name for f in spec.formulas}
    names = trace.names

    acc_full: dict[Location, set] = {}
    acc_order: dict[Location, list] = {}
    final_def: dict[Location, tuple] = {}
    for pt in domain_points(spec):
        point = dict(zip(names, pt))
        for fi in applicable_formulas(spec, point):
            f = spec.formulas[fi]
            wloc = (f.result.name, access_location(f.result, point))
            if not in_bounds(wloc[1], shapes[f.result.name]):
                continue
            event = (pt, fi)
            if f.op == "+=":
                acc_full.setdefault(wloc, set()).add(event)
                acc_order.setdefault(wloc, []).append(event)
            else:
                final_def[wloc] = event

    marked = set(plan.snapshot_locs) if plan.kind == "snapshot" else set()
    tags: dict[Location, tuple] = {}
    arrivals: dict[Location, list] = {}
    banked: set[Location] = set()
    violations: list[str] = []
    commutes = False
    events = 0

    def check_reads(f, point, pt, wloc, local):
        for term in f.terms:
            for access in term.accesses:
                if access.name not in written:
                    continue
                loc = (access.name, access_location(access, point))
                if not in_bounds(loc[1], shapes[access.name]):
                    continue
                if loc in local:
                    continue  # produced by an earlier formula at this point
                if f.op == "+=" and loc == wloc:
                    if tags.get(loc, _INIT)[0] == "def":
                        violations.append(
                            f"accumulator {_loc_text(loc)} clobbered before point {pt}"
                        )
                    continue
                if tags.get(loc, _INIT)[0] == "init" or loc in banked:
                    continue
                violations.append(
                    f"{_loc_text(loc)} overwritten before its pre-pass read at point {pt}"
                )

    def do_write(f, event, wloc):
        nonlocal events
        events += 1
        if wloc in marked:
            banked.add(wloc)
        current = tags.get(wloc, _INIT)
        if f.op == "=":
            tags[wloc] = ("def", event)
        else:
            contributions = current[1] if current[0] == "acc" else frozenset()
            tags[wloc] = ("acc", contributions | {event})
            arrivals.setdefault(wloc, []).append(event)

    for r in trace.records:
        if r.epilogue:
            # the epilogue runs after every visit and wants final values,
            # so its reads are covered by the completeness checks below
            continue
        point = dict(zip(names, r.lattice_point))
        pt = r.lattice_point
        local: set[Location] = set()
        for fi in applicable_formulas(spec, point):
            f = spec.formulas[fi]
            wloc = (f.result.name, access_location(f.result, point))
            if not in_bounds(wloc[1], shapes[f.result.name]):
                continue
            check_reads(f, point, pt, wloc, local)
            do_write(f, (pt, fi), wloc)
            local.add(wloc)

    for loc, expected in acc_full.items():
        tag = tags.get(loc, _INIT)
        got = tag[1] if tag[0] == "acc" else frozenset()
        if set(got) != expected:
            violations.append(
                f"accumulation at {_loc_text(loc)} gathered {len(got)} of "
                f"{len(expected)} contributions"
            )
        elif arrivals.get(loc, []) != acc_order[loc]:
            commutes = True
    for loc, event in final_def.items():
        if loc[0] in spec.temp_arrays:
            continue
        tag = tags.get(loc, _INIT)
        if tag[0] != "def" or tag[1] != event:
            violations.append(
                f"final value of {_loc_text(loc)} does not come from its last write"
            )

    return DependencyReport(
        ok=not violations,
        violations=tuple(violations),
        commutes=commutes,
        events=events,
    )


# ---------------------------------------------------------------------------
# equivalence

@dataclass(frozen=True)
class EquivalenceReport:
    ok: bool
    trials: int
    counterexample: dict | None = None

    def summary(self) -> str:
        if self.ok:
            return f"equivalence: ok ({self.trials} random stores)"
        assert self.counterexample is not None
        c = self.counterexample
        return (
            f"equivalence: FAIL on trial {c['trial']} at {c['location']}: "
            f"{c['got']} != {c['want']}"
        )


def _shared_arrays(a: VisitTrace, b: VisitTrace) -> dict[str, tuple[int, ...]]:
    sa, sb = _trace_shapes(a), _trace_shapes(b)
    temps = set(a.spec.temp_arrays) | set(b.spec.temp_arrays)
    shared = {}
    for name in sorted(set(sa) & set(sb)):
        if name in temps:
            continue
        if sa[name] != sb[name]:
            raise ValueError(f"array {name} shaped {sa[name]} and {sb[name]}")
        shared[name] = sa[name]
    return shared


def equivalent(
    candidate: VisitTrace | ScheduleTree,
    reference: VisitTrace | ScheduleTree,
    trials: int = 10,
    seed: int = DEFAULT_SEED,
) -> EquivalenceReport:
    """Same final arrays as the reference on seeded random stores."""
    if isinstance(candidate, ScheduleTree):
        candidate = enumerate_schedule(candidate)
    if isinstance(reference, ScheduleTree):
        reference = enumerate_schedule(reference)
    if candidate.spec is None or reference.spec is None:
        raise ValueError("equivalence needs spec-driven traces")
    shared = _shared_arrays(candidate, reference)
    for trial in range(trials):
        inputs = random_store(shared, seed + trial)
        store_a = zeros(_trace_shapes(candidate))
        store_b = zeros(_trace_shapes(reference))
        for name, cells in inputs.items():
            store_a[name] = dict(cells)
            store_b[name] = dict(cells)
        got = interpret(candidate, store_a)
        want = interpret(reference, store_b)
        for name in shared:
            if got[name] != want[name]:
                bad = sorted(
                    loc for loc in got[name] if got[name][loc] != want[name][loc]
                )[0]
                return EquivalenceReport(
                    ok=False,
                    trials=trial + 1,
                    counterexample={
                        "trial": trial,
                        "location": _loc_text((name, bad)),
                        "got": got[name][bad],
                        "want": want[name][bad],
                    },
                )
    return EquivalenceReport(ok=True, trials=trials)


# ---------------------------------------------------------------------------
# parallelism and locality

@dataclass(frozen=True)
class ParallelismProfile:
    widths: tuple[int, ...]
    colors: dict[int, int] = field(default_factory=dict)
    measure: dict[int, Fraction] = field(default_factory=dict)
    locality: int = 0
    points: int = 0

    def to_json(self) -> dict:
        return {
            "widths": list(self.widths),
            "colors": {str(c): n for c, n in sorted(self.colors.items())},
            "measure": {str(c): str(m) for c, m in sorted(self.measure.items())},
            "locality": self.locality,
            "points": self.points,
        }


def analyze(trace: VisitTrace) -> ParallelismProfile:
    """Width per convolution level, color histogram with its exact
    measure, and a locality score counting unit-distance transitions.

    Records sharing an outer time prefix form one parallel set; the
    width at level L is the largest set when the innermost L offsets
    are ignored.
    """
    records = [r for r in trace.records if not r.epilogue]
    if not records:
        return ParallelismProfile(widths=(1,))
    depth = max(len(r.time_point) for r in records)
    top = max(r.level for r in records)
    widths = []
    for level in range(top + 1):
        groups = Counter(
            (r.copy, r.time_point[: depth - level]) for r in records
        )
        widths.append(max(groups.values()))
    colors = Counter(r.color for r in records)
    for c in range(trace.color_bits + 1):
        colors.setdefault(c, 0)
    total = len(records)
    measure = {c: Fraction(n, total) for c, n in colors.items()}
    locality = 0
    for a, b in zip(records, records[1:]):
        if len(a.lattice_point) != len(b.lattice_point):
            continue
        dist = sum(abs(x - y) for x, y in zip(a.lattice_point, b.lattice_point))
        if dist == 1:
            locality += 1
    return ParallelismProfile(
        widths=tuple(widths),
        colors=dict(colors),
        measure=measure,
        locality=locality,
        points=total,
    )


def verify_report(
    trace: VisitTrace,
    reference: VisitTrace | None = None,
    trials: int = 10,
    seed: int = DEFAULT_SEED,
) -> dict:
    """Bundle of every check on one schedule, JSON-ready."""
    coverage = check_coverage(trace)
    dependencies = check_dependencies(trace)
    profile = analyze(trace)
    report = {
        "coverage": {
            "ok": coverage.ok,
            "expected": coverage.expected,
            "visited": coverage.visited,
        },
        "violations": list(dependencies.violations),
        "commutes": dependencies.commutes,
        "widths": list(profile.widths),
        "colors": {str(c): n for c, n in sorted(profile.colors.items())},
        "measure": {str(c): str(m) for c, m in sorted(profile.measure.items())},
        "locality": profile.locality,
        "ok": coverage.ok and dependencies.ok,
    }
    if reference is not None:
        eq = equivalent(trace, reference, trials=trials, seed=seed)
        report["equivalence"] = {
            "ok": eq.ok,
            "trials": eq.trials,
            "counterexample": eq.counterexample,
        }
        report["ok"] = report["ok"] and eq.ok
    return report
