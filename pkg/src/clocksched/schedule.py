"""Build clock-structured enumeration trees from formula specs.

The builder turns a spec plus a clock and a graduation mapping into a
nest of counting loops.  Each loop advances a power-of-two step inside
the bounds set by its parent, so the innermost variable sweeps the
whole time span while outer variables mark coarser graduations.  Loop
variables are divided back by their steps to recover index values, and
guards cut the enumeration down to the spec's domain.

Rewrites that make reordering safe live here too: permutation cycles
get a block-bound scratch index and a save/swap/restore triple,
scalar accumulators get per-copy cells with a reduction epilogue, and
anti-dependence overlaps get a snapshot plan sized by liveness.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .clock import Clock, is_power_of_two, log2_exact, make_clock
from .formula import (
    ArrayAccess,
    BlockBind,
    ComputationSpec,
    DepEdge,
    Factor,
    Formula,
    IndexDecl,
    LessThan,
    Term,
    access_location,
    applicable_formulas,
    check_legality,
    domain_points,
    extract_dependencies,
    in_bounds,
    infer_shapes,
    parse_spec,
)


class BuildError(ValueError):
    pass


class UnsupportedRewriteError(BuildError):
    pass


class TempBudgetError(BuildError):
    def __init__(self, minimal: int, budget: int):
        super().__init__(
            f"temporary budget {budget} is below the minimal {minimal} "
            f"cells this schedule needs"
        )
        self.minimal = minimal
        self.budget = budget


# ---------------------------------------------------------------------------
# affine bounds

@dataclass(frozen=True)
class Affine:
    """Sum of loop variables plus a constant."""

    terms: tuple[tuple[str, int], ...] = ()
    const: int = 0

    @staticmethod
    def var(name: str) -> Affine:
        return Affine(terms=((name, 1),))

    @staticmethod
    def of(value: int) -> Affine:
        return Affine(const=value)

    def plus(self, value: int) -> Affine:
        return Affine(self.terms, self.const + value)

    def evaluate(self, env: Mapping[str, int]) -> int:
        return sum(c * env[n] for n, c in self.terms) + self.const

    def substitute(self, bindings: Mapping[str, int]) -> Affine:
        terms = []
        const = self.const
        for name, coef in self.terms:
            if name in bindings:
                const += coef * bindings[name]
            else:
                terms.append((name, coef))
        return Affine(tuple(terms), const)

    def render(self) -> str:
        parts = []
        for name, coef in self.terms:
            if coef == 1:
                parts.append(("+", name))
            elif coef == -1:
                parts.append(("-", name))
            else:
                parts.append(("+" if coef > 0 else "-", f"{abs(coef)}*{name}"))
        if self.const or not parts:
            parts.append(("+" if self.const >= 0 else "-", str(abs(self.const))))
        text = ""
        for sign, chunk in parts:
            if not text:
                text = chunk if sign == "+" else f"-{chunk}"
            else:
                text += sign + chunk
        return text


@dataclass(frozen=True)
class Guard:
    """Predicate over recovered index values: ``left < right``."""

    left: str
    right: str | int

    def holds(self, point: Mapping[str, int]) -> bool:
        bound = self.right if isinstance(self.right, int) else point[self.right]
        return point[self.left] < bound


# ---------------------------------------------------------------------------
# tree nodes

@dataclass(frozen=True)
class FormulaBlock:
    """Leaf: formula indexes into the tree's spec, or None for a bare
    time skeleton whose body is the offset tuple itself."""

    formulas: tuple[int, ...] | None = None


@dataclass(frozen=True)
class EnumNode:
    index: str
    step: int
    extent: int
    lower: Affine = Affine()
    converted: bool = False  # lower bound rides on the parent variable
    synthetic: bool = False  # invented time loop, not a spec index
    contributes: tuple[tuple[str, int], ...] = ()  # (spec index, weight)
    digit_base: int = 0  # first digit; nonzero after an unfold narrows the range
    body: tuple["Node", ...] = ()

    def __post_init__(self) -> None:
        if self.step < 1 or self.extent % self.step:
            raise BuildError(f"step {self.step} must divide extent {self.extent}")

    @property
    def count(self) -> int:
        return self.extent // self.step


@dataclass(frozen=True)
class FormGroup:
    """Several indexes sharing one graduation slot; bodies run over
    their product."""

    members: tuple[EnumNode, ...]
    slot_step: int
    body: tuple["Node", ...] = ()


Node = EnumNode | FormGroup | FormulaBlock


@dataclass(frozen=True)
class UnfoldCopy:
    fixed: tuple[tuple[str, int], ...]
    body: tuple[Node, ...]
    independent: bool = True


@dataclass(frozen=True)
class LoopSpec:
    name: str
    step: int
    count: int
    contributes: tuple[tuple[str, int], ...]
    synthetic: bool = False


@dataclass(frozen=True)
class GradMapping:
    """Ordered loop slots, outermost first.  A slot with several loops
    shares one graduation (a form group)."""

    slots: tuple[tuple[LoopSpec, ...], ...]
    span: int

    def representatives(self) -> tuple[str, ...]:
        return tuple(slot[0].name for slot in self.slots)

    def assignments(self) -> dict[str, int]:
        return {l.name: l.step for slot in self.slots for l in slot}


@dataclass(frozen=True)
class TempPlan:
    kind: str  # "none" | "swap" | "snapshot"
    locations: int = 0
    width: int = 1  # achievable unfold width
    array: str | None = None
    snapshot_locs: tuple[tuple[str, tuple[int, ...]], ...] = ()
    slots: tuple[int, ...] = ()
    minimal: int = 0


NO_PLAN = TempPlan(kind="none")


@dataclass(frozen=True)
class ScheduleTree:
    roots: tuple[Node | UnfoldCopy, ...]
    clock: Clock | None = None
    spec: ComputationSpec | None = None
    source: str | None = None
    mapping: GradMapping | None = None
    plan: TempPlan = NO_PLAN
    guards: tuple[Guard, ...] = ()
    epilogue: tuple[Formula, ...] = ()


# ---------------------------------------------------------------------------
# time skeletons

_LEVEL_SUFFIXES = ("", "X", "Y", "Z", "W", "V", "U")


def _level_names(k: int, prefix: str) -> list[str]:
    if k > len(_LEVEL_SUFFIXES):
        return [prefix if i == 0 else f"{prefix}X{i}" for i in range(k)]
    return [prefix + _LEVEL_SUFFIXES[i] for i in range(k)]


def time_skeleton(clock: Clock, prefix: str = "T") -> ScheduleTree:
    """Unconvolved counting nest over the clock's full state set.

    Level i steps ``span / rate**(i+1)``; every loop starts at zero,
    so the time value of a visit is the plain sum of the variables.
    """
    names = _level_names(clock.k, prefix)
    node: Node = FormulaBlock(None)
    step = clock.unit_scale
    for name in reversed(names):
        node = EnumNode(
            index=name,
            step=step,
            extent=step * clock.rate,
            lower=Affine(),
            synthetic=True,
            body=(node,),
        )
        step *= clock.rate
    return ScheduleTree(roots=(node,), clock=clock)


def _chain(nodes: Sequence[EnumNode], leaf: Node) -> Node:
    built = leaf
    for n in reversed(nodes):
        built = replace(n, body=(built,))
    return built


def _walk_chain(root: Node) -> list[Node]:
    """Nest as a list, outermost first, ending with the leaf."""
    out: list[Node] = []
    node: Node = root
    while True:
        out.append(node)
        if isinstance(node, FormulaBlock):
            return out
        body = node.body
        if len(body) != 1:
            raise BuildError("convolution only applies to a simple nest")
        node = body[0]


def apply_convolutions(tree: ScheduleTree, levels: int) -> ScheduleTree:
    """Set exactly ``levels`` loops (below the root) to ride on their
    parent's current value.

    A converted synthetic loop is renamed with an ``N`` suffix so the
    emitted nest marks which time indexes are convolved.  Lattice
    recovery is unchanged: a converted loop's offset is measured from
    its lower bound either way.
    """
    if len(tree.roots) != 1 or isinstance(tree.roots[0], UnfoldCopy):
        raise BuildError("convolutions apply before unfolding")
    chain = _walk_chain(tree.roots[0])
    depth = len(chain) - 1
    if not 0 <= levels <= depth - 1:
        raise BuildError(f"cannot convert {levels} levels in a nest of depth {depth}")
    leaf = chain[-1]
    rebuilt: list[EnumNode] = []
    parent_name: str | None = None
    renames: dict[str, str] = {}
    for i, node in enumerate(chain[:-1]):
        assert isinstance(node, EnumNode)
        convert = 1 <= i <= levels
        name = node.index
        if convert and node.synthetic and not name.endswith("N"):
            name = name + "N"
        if name != node.index:
            renames[node.index] = name
        lower = Affine.var(parent_name) if convert and parent_name else Affine()
        rebuilt.append(
            replace(node, index=name, lower=lower, converted=convert, body=())
        )
        parent_name = name
    root = _chain(rebuilt, leaf)
    return replace(tree, roots=(root,))


def compose_skeleton(factors: Sequence[Clock]) -> ScheduleTree:
    """Fully convolved skeleton of a factor chain.

    Each factor is convolved internally; the next factor's root starts
    at the previous factor's innermost variable, so the innermost loop
    variable sweeps the composed span.  Factor prefixes follow the
    outer-to-inner scheme ..., TG2, TG, T.
    """
    prefixes = ["T"]
    for i in range(1, len(factors)):
        prefixes.append("TG" if i == 1 else f"TG{i}")
    prefixes.reverse()
    nodes: list[EnumNode] = []
    prev_inner: str | None = None
    for clock, prefix in zip(factors, prefixes):
        names = _level_names(clock.k, prefix)
        step = clock.span // clock.rate
        for j, name in enumerate(names):
            if j > 0 and not name.endswith("N"):
                name = name + "N"
            converted = j > 0 or prev_inner is not None
            if j > 0:
                lower = Affine.var(nodes[-1].index)
            elif prev_inner is not None:
                lower = Affine.var(prev_inner)
            else:
                lower = Affine()
            nodes.append(
                EnumNode(
                    index=name,
                    step=step,
                    extent=step * clock.rate,
                    lower=lower,
                    converted=converted,
                    synthetic=True,
                )
            )
            step //= clock.rate
        prev_inner = nodes[-1].index
    root = _chain(nodes, FormulaBlock(None))
    return ScheduleTree(roots=(root,), clock=factors[0] if factors else None)


# ---------------------------------------------------------------------------
# padding and graduation mappings

def next_power_of_two(n: int) -> int:
    if n < 1:
        raise BuildError(f"extent {n} must be positive")
    return 1 << (n - 1).bit_length()


def pad_and_guard(spec: ComputationSpec) -> ComputationSpec:
    """Round every index extent up to a power of two and guard the
    padded range back down to the declared one."""
    indexes = []
    guards: list[LessThan] = []
    for decl in spec.indexes:
        size = next_power_of_two(decl.size)
        if size != decl.size:
            guards.append(LessThan(decl.name, decl.size))
        indexes.append(IndexDecl(decl.name, size))
    if not guards:
        return spec
    return replace(spec, indexes=tuple(indexes), domain=spec.domain + tuple(guards))


def _bound_sources(spec: ComputationSpec) -> dict[str, BlockBind]:
    return {g.index: g for g in spec.domain if isinstance(g, BlockBind)}


def _free_names(spec: ComputationSpec) -> list[str]:
    bound = _bound_sources(spec)
    return [d.name for d in spec.indexes if d.name not in bound]


def mapping_from_order(
    spec: ComputationSpec, clock: Clock, order: Sequence[str] | None = None
) -> GradMapping:
    """One loop per index, outermost first, each index at full extent.

    The product of the extents must fill the clock's state set exactly.
    """
    sizes = dict(spec.index_sizes())
    names = list(order) if order is not None else _free_names(spec)
    if len(set(names)) != len(names):
        raise BuildError("order repeats an index")
    for name in names:
        if name not in sizes:
            raise BuildError(f"order names unknown index {name}")
    bound = _bound_sources(spec)
    for name in names:
        if name in bound:
            raise BuildError(f"index {name} is derived by a block bind")
    total = 1
    for name in names:
        if not is_power_of_two(sizes[name]):
            raise BuildError(f"index {name} extent {sizes[name]} is not a power of two")
        total *= sizes[name]
    if total != clock.states:
        raise BuildError(
            f"mapped extents fill {total} states but the clock has {clock.states}"
        )
    slots = []
    step = clock.span
    for name in names:
        step //= sizes[name]
        slots.append((LoopSpec(name, step, sizes[name], ((name, 1),)),))
    return GradMapping(slots=tuple(slots), span=clock.span)


def _build_mapping(
    spec: ComputationSpec, clock: Clock, assignment: Mapping[str, int], mode: str
) -> GradMapping:
    sizes = dict(spec.index_sizes())
    binds = _bound_sources(spec)
    items = sorted(assignment.items(), key=lambda kv: (-kv[1], kv[0]))
    if not items:
        raise BuildError("empty graduation assignment")
    grouped: list[tuple[int, list[str]]] = []
    for name, value in items:
        if value < 1 or not is_power_of_two(value):
            raise BuildError(f"graduation {value} for {name} is not a power of two")
        if grouped and grouped[-1][0] == value:
            grouped[-1][1].append(name)
        else:
            grouped.append((value, [name]))

    # Graduation values either name the step of each loop directly or
    # the extent it sweeps (twice the step for a rate-2 clock); the two
    # readings are tried in turn by the caller.
    slots: list[list[dict]] = []
    incoming = clock.span
    values = [value for value, _ in grouped]
    for pos, (value, members) in enumerate(grouped):
        if mode == "steps":
            step = value
        else:
            if value != incoming:
                raise BuildError(
                    f"graduation {value} does not continue the chain at {incoming}"
                )
            step = values[pos + 1] if pos + 1 < len(values) else clock.unit_scale
        if step < 1 or incoming % step:
            raise BuildError(f"step {step} does not divide the enclosing extent {incoming}")
        capacity = incoming // step
        if len(members) == 1:
            name = members[0]
            slots.append(
                [dict(name=name, step=step, count=capacity, contributes=[], synthetic=False)]
            )
        else:
            if any(m not in sizes for m in members):
                raise BuildError("shared graduations require declared indexes")
            # the first declared index speaks for the shared slot
            declared = list(sizes)
            members = sorted(members, key=declared.index)
            product = 1
            for m in members:
                product *= sizes[m]
            if product < 1 or capacity % product:
                raise BuildError(
                    f"shared graduation holds {capacity} states, not {product}"
                )
            slot_step = step * (capacity // product)
            slots.append(
                [
                    dict(name=m, step=slot_step, count=sizes[m], contributes=[(m, 1)], synthetic=False)
                    for m in members
                ]
            )
            step = slot_step
        incoming = step

    # Attach synthetic loops to the next declared index: the synthetic
    # takes the unit weight of that index and pushes the index's own
    # loop up by its count, so the outer loop enumerates residues.
    pending: list[dict] = []
    for slot in slots:
        if len(slot) > 1:
            if pending:
                raise BuildError("synthetic graduation cannot join a shared slot")
            continue
        loop = slot[0]
        name = loop["name"]
        if name in sizes:
            weight = 1
            for synth in pending:
                synth["contributes"] = [(name, weight)]
                weight *= synth["count"]
            pending.clear()
            loop["contributes"] = [(name, weight)]
            if name in binds:
                bind = binds[name]
                loop["contributes"].append((bind.source, bind.block))
        else:
            loop["synthetic"] = True
            pending.append(loop)
    if pending:
        names = ", ".join(l["name"] for l in pending)
        raise BuildError(f"synthetic graduations {names} have no index to refine")

    # Every index must be recovered by a complete positional system of
    # loop digits (or derived from one through a block bind).
    contributions: dict[str, list[tuple[int, dict]]] = {}
    for slot in slots:
        for loop in slot:
            for target, weight in loop["contributes"]:
                contributions.setdefault(target, []).append((weight, loop))
    for decl in spec.indexes:
        name = decl.name
        pairs = sorted(contributions.get(name, []), key=lambda p: p[0])
        if not pairs:
            if name in binds:
                continue
            raise BuildError(f"index {name} is not mapped to any graduation")
        expect = 1
        total = 1
        for weight, loop in pairs:
            if weight != expect:
                raise BuildError(f"index {name} digits do not stack (weight {weight})")
            expect *= loop["count"]
            total *= loop["count"]
        if total < decl.size:
            only = pairs[0][1]
            triangular = any(
                isinstance(g, LessThan) and g.left == name and isinstance(g.right, str)
                for g in spec.domain
            )
            if len(pairs) == 1 and triangular:
                only["count"] = decl.size
            else:
                raise BuildError(
                    f"index {name} covers {total} of {decl.size} values"
                )
        elif total > decl.size:
            raise BuildError(f"index {name} covers {total} of {decl.size} values")

    frozen = tuple(
        tuple(
            LoopSpec(
                name=l["name"],
                step=l["step"],
                count=l["count"],
                contributes=tuple(l["contributes"]),
                synthetic=l["synthetic"],
            )
            for l in slot
        )
        for slot in slots
    )
    return GradMapping(slots=frozen, span=clock.span)


def mapping_from_assignment(
    spec: ComputationSpec, clock: Clock, assignment: Mapping[str, int]
) -> GradMapping:
    """Read a name-to-graduation assignment against the clock.

    Values naming loop steps are preferred; if they cannot chain, they
    are reread as the extents each loop sweeps.
    """
    problems = []
    for mode in ("steps", "extents"):
        try:
            return _build_mapping(spec, clock, assignment, mode)
        except BuildError as exc:
            problems.append(f"as {mode}: {exc}")
    raise BuildError("; ".join(problems))


def map_indexes(
    spec: ComputationSpec,
    clock: Clock,
    mapping: GradMapping,
    convolutions: int | None = None,
) -> ScheduleTree:
    """Lay the mapped loops out as a counting nest over the clock."""
    if mapping.span != clock.span:
        raise BuildError("mapping span does not match the clock span")
    nodes: list[EnumNode | FormGroup] = []
    parent: str | None = None
    for slot in mapping.slots:
        lower = Affine.var(parent) if parent else Affine()
        if len(slot) == 1:
            loop = slot[0]
            nodes.append(
                EnumNode(
                    index=loop.name,
                    step=loop.step,
                    extent=loop.count * loop.step,
                    lower=lower,
                    converted=parent is not None,
                    synthetic=loop.synthetic,
                    contributes=loop.contributes,
                )
            )
            parent = loop.name
        else:
            members = tuple(
                EnumNode(
                    index=loop.name,
                    step=loop.step,
                    extent=loop.count * loop.step,
                    lower=lower,
                    converted=parent is not None,
                    synthetic=loop.synthetic,
                    contributes=loop.contributes,
                )
                for loop in slot
            )
            nodes.append(FormGroup(members=members, slot_step=slot[0].step))
            parent = slot[0].name
    if isinstance(nodes[0], EnumNode) and nodes[0].extent != clock.span:
        raise BuildError("outermost loop does not sweep the clock span")
    leaf = FormulaBlock(tuple(range(len(spec.formulas))))
    built: Node = leaf
    for n in reversed(nodes):
        built = replace(n, body=(built,))
    guards = tuple(
        Guard(g.left, g.right) for g in spec.domain if isinstance(g, LessThan)
    )
    tree = ScheduleTree(
        roots=(built,), clock=clock, spec=spec, mapping=mapping, guards=guards
    )
    if convolutions is not None:
        tree = apply_convolutions(tree, convolutions)
    return tree


# ---------------------------------------------------------------------------
# rewrites: permutation cycles and scalar accumulators

def _fresh_name(base: str, taken: Iterable[str]) -> str:
    used = set(taken)
    if base not in used:
        return base
    n = 2
    while f"{base}{n}" in used:
        n += 1
    return f"{base}{n}"


def normalize_spec(
    spec: ComputationSpec, budget: int | None = None
) -> tuple[ComputationSpec, TempPlan]:
    """Unravel permutation cycles through a block-bound scratch index.

    ``a(I,J) = a(J,I)`` swaps pairs in place, which no enumeration
    order survives without help.  The rewrite keeps one ordered
    representative of each pair (J < I), saves the first value into a
    scratch cell keyed by a new index T, and restores it after the
    mirrored store.  T blocks the rows, so wider budgets mean more
    independent blocks and a wider legal unfold.
    """
    deps = extract_dependencies(spec)
    cyclic = [e for e in deps if e.permutation is not None and e.cycles()]
    if not cyclic:
        return spec, NO_PLAN
    if len(spec.formulas) != 1 or len(cyclic) != 1:
        raise UnsupportedRewriteError(
            "in-place permutations are only unraveled for a single formula"
        )
    edge = cyclic[0]
    formula = spec.formulas[0]
    if formula.op != "=":
        raise UnsupportedRewriteError("permutation cycle under accumulation")
    cycles = edge.cycles()
    if len(cycles) != 1 or len(cycles[0]) != 2:
        order = max(len(c) for c in cycles)
        raise UnsupportedRewriteError(
            f"only pairwise cycles are unraveled, this one has order {order}"
        )
    pos_a, pos_b = cycles[0]
    sizes = dict(spec.index_sizes())
    left = formula.result.args[pos_a].index
    right = formula.result.args[pos_b].index
    assert left is not None and right is not None
    if sizes[left] != sizes[right]:
        raise UnsupportedRewriteError("cycle over indexes of different extents")
    rows = sizes[left]
    if budget is not None and budget < 1:
        raise TempBudgetError(1, budget)
    cap = rows if budget is None else min(budget, rows)
    width = 1
    while width * 2 <= cap:
        width *= 2
    block = rows // width
    taken = [d.name for d in spec.indexes] + list(spec.temp_arrays)
    for f in spec.formulas:
        taken.append(f.result.name)
        taken.extend(f.arrays_read())
    scratch_index = _fresh_name("T", taken)
    scratch = _fresh_name("tmp", taken + [scratch_index])
    read_access = formula.terms[0].accesses[0]
    cell = ArrayAccess(scratch, (Factor(scratch_index),))
    save = Formula(result=cell, op="=", terms=(Term(1, (formula.result,)),))
    restore = Formula(result=read_access, op="=", terms=(Term(1, (cell,)),))
    rewritten = replace(
        spec,
        indexes=(IndexDecl(scratch_index, width),) + spec.indexes,
        domain=spec.domain
        + (BlockBind(scratch_index, left, block), LessThan(right, left)),
        temp_arrays=spec.temp_arrays + (scratch,),
        formulas=(save, formula, restore),
    )
    plan = TempPlan(kind="swap", locations=width, width=width, array=scratch, minimal=1)
    return rewritten, plan


def _scalar_accumulator(spec: ComputationSpec) -> int | None:
    for i, f in enumerate(spec.formulas):
        if f.op == "+=" and not f.result.args:
            return i
    return None


def _substitute_node(node: Node, bindings: Mapping[str, int]) -> Node:
    if isinstance(node, FormulaBlock):
        return node
    if isinstance(node, FormGroup):
        return replace(
            node,
            members=tuple(_substitute_node(m, bindings) for m in node.members),
            body=tuple(_substitute_node(b, bindings) for b in node.body),
        )
    return replace(
        node,
        lower=node.lower.substitute(bindings),
        body=tuple(_substitute_node(b, bindings) for b in node.body),
    )


def _add_accumulator(tree: ScheduleTree, name: str, copies: int) -> ScheduleTree:
    spec = tree.spec
    assert spec is not None
    target = _scalar_accumulator(spec)
    if target is None:
        raise UnsupportedRewriteError(f"no scalar accumulation to unfold over {name}")
    root = tree.roots[0]
    if not isinstance(root, EnumNode) or len(root.contributes) != 1:
        raise UnsupportedRewriteError("accumulator unfolding needs a plainly mapped outer loop")
    source, weight = root.contributes[0]
    if weight != 1 or source not in dict(spec.index_sizes()):
        raise UnsupportedRewriteError("accumulator unfolding needs a plainly mapped outer loop")
    size = dict(spec.index_sizes())[source]
    if size % copies:
        raise BuildError(f"{copies} copies do not divide the outer extent {size}")
    block = size // copies
    taken = [d.name for d in spec.indexes] + list(spec.temp_arrays)
    scratch = _fresh_name("s", taken)
    formula = spec.formulas[target]
    cells = ArrayAccess(scratch, (Factor(name),))
    rewritten = replace(formula, result=cells)
    # accumulate, not assign: the original += keeps whatever the
    # accumulator held before the pass, so the reduction must too
    reduction = Formula(
        result=formula.result,
        op="+=",
        terms=tuple(
            Term(1, (ArrayAccess(scratch, (Factor(None, b),)),)) for b in range(copies)
        ),
    )
    spec2 = replace(
        spec,
        indexes=(IndexDecl(name, copies),) + spec.indexes,
        domain=spec.domain + (BlockBind(name, source, block),),
        temp_arrays=spec.temp_arrays + (scratch,),
        formulas=tuple(
            rewritten if i == target else f for i, f in enumerate(spec.formulas)
        ),
    )
    plan = TempPlan(
        kind="swap", locations=copies, width=copies, array=scratch, minimal=1
    )
    return replace(tree, spec=spec2, plan=plan, epilogue=tree.epilogue + (reduction,))


def unfold(tree: ScheduleTree, name: str, copies: int) -> ScheduleTree:
    """Split the outermost wheel into independent side-by-side copies.

    The copies partition the outer digit range, so their index sets are
    disjoint; scratch cells are keyed by the unfolded index, keeping
    each copy's working storage private.
    """
    if copies < 1 or not is_power_of_two(copies):
        raise BuildError(f"unfold width {copies} must be a positive power of two")
    if len(tree.roots) != 1 or isinstance(tree.roots[0], UnfoldCopy):
        raise BuildError("tree is already unfolded")
    spec = tree.spec
    known = {d.name for d in spec.indexes} if spec else set()
    if spec is not None and name not in known:
        tree = _add_accumulator(tree, name, copies)
        spec = tree.spec
        known = {d.name for d in spec.indexes}
    root = tree.roots[0]
    if not isinstance(root, EnumNode):
        raise BuildError("only a loop nest can be unfolded")
    if name != root.index:
        binds = _bound_sources(spec) if spec else {}
        bind = binds.get(name)
        contributes = dict(root.contributes)
        if bind is None or bind.source not in contributes:
            raise BuildError(f"{name} is not carried by the outermost loop")
    if copies == 1:
        return tree
    if root.count % copies:
        raise BuildError(
            f"{copies} copies do not divide the outer count {root.count}"
        )
    group = root.count // copies
    base = root.lower.const
    if root.lower.terms:
        raise BuildError("outer loop must have constant bounds")
    out: list[UnfoldCopy] = []
    for b in range(copies):
        lo = base + b * group * root.step
        narrowed = replace(
            root,
            lower=Affine.of(lo),
            extent=group * root.step,
            digit_base=b * group,
            body=root.body,
        )
        out.append(UnfoldCopy(fixed=((name, b),), body=(narrowed,)))
    return replace(tree, roots=tuple(out))


# ---------------------------------------------------------------------------
# temporary space

def allocate_temporaries(
    spec: ComputationSpec,
    deps: Sequence[DepEdge],
    budget: int | None = None,
    points: Sequence[Mapping[str, int]] | None = None,
) -> TempPlan:
    """Size the constant scratch space a visit order needs.

    Overlapping-window reads want the value a cell held before the pass
    started.  Walking the visit order, a cell must be banked from its
    overwrite until its last such read; the plan's size is the peak
    number of banked cells plus one working cell for the in-flight
    update.  A budget below that is refused and the minimum reported.
    """
    if spec.temp_arrays:
        shapes = infer_shapes(spec)
        cells = 0
        for t in spec.temp_arrays:
            n = 1
            for d in shapes.get(t, ()):
                n *= d
            cells += n
        if budget is not None and budget < cells:
            raise TempBudgetError(1, budget)
        return TempPlan(kind="swap", locations=cells, width=cells, array=spec.temp_arrays[0], minimal=1)
    overlapping = [
        e for e in deps if e.vector is not None and any(d > 0 for d in e.vector)
    ]
    if not overlapping or points is None:
        return NO_PLAN
    shapes = infer_shapes(spec)
    written = {f.result.name for f in spec.formulas}
    first_write: dict[tuple[str, tuple[int, ...]], int] = {}
    last_read: dict[tuple[str, tuple[int, ...]], int] = {}
    for pos, point in enumerate(points):
        local: set[tuple[str, tuple[int, ...]]] = set()
        for fi in applicable_formulas(spec, point):
            f = spec.formulas[fi]
            wloc = (f.result.name, access_location(f.result, point))
            for term in f.terms:
                for access in term.accesses:
                    if access.name not in written:
                        continue
                    loc = (access.name, access_location(access, point))
                    if not in_bounds(loc[1], shapes[access.name]):
                        continue
                    if loc in local or (f.op == "+=" and loc == wloc):
                        continue
                    if loc in first_write and first_write[loc] < pos:
                        last_read[loc] = pos
            if in_bounds(wloc[1], shapes[f.result.name]):
                first_write.setdefault(wloc, pos)
                local.add(wloc)
    intervals = [
        (first_write[loc], end, loc) for loc, end in last_read.items()
    ]
    if not intervals:
        return NO_PLAN
    events: list[tuple[int, int]] = []
    for start, end, _ in intervals:
        events.append((start, 1))
        events.append((end + 1, -1))
    live = peak = 0
    for _, delta in sorted(events):
        live += delta
        peak = max(peak, live)
    minimal = peak + 1
    if budget is not None and budget < minimal:
        raise TempBudgetError(minimal, budget)
    slots: list[int] = []
    free: list[int] = []
    busy: list[tuple[int, int]] = []  # (end, slot)
    assigned = []
    for start, end, loc in sorted(intervals):
        still = []
        for e, s in busy:
            if e < start:
                free.append(s)
            else:
                still.append((e, s))
        busy = still
        slot = free.pop() if free else len(slots)
        if slot == len(slots):
            slots.append(slot)
        busy.append((end, slot))
        assigned.append((loc, slot))
    return TempPlan(
        kind="snapshot",
        locations=minimal,
        snapshot_locs=tuple(loc for loc, _ in sorted(assigned)),
        slots=tuple(slot for _, slot in sorted(assigned)),
        minimal=minimal,
    )


# ---------------------------------------------------------------------------
# whole pipelines

def _as_spec(source: str | ComputationSpec) -> tuple[ComputationSpec, str | None]:
    if isinstance(source, ComputationSpec):
        return source, None
    spec = parse_spec(source)
    return spec, source


def _check(spec: ComputationSpec) -> None:
    problems = check_legality(spec)
    if problems:
        raise BuildError("; ".join(problems))


def _point_envs(spec: ComputationSpec) -> list[dict[str, int]]:
    names = spec.index_names()
    return [dict(zip(names, pt)) for pt in domain_points(spec)]


def sequential_schedule(source: str | ComputationSpec) -> ScheduleTree:
    """Reference nest: declaration order, unit steps, guards as given.

    Specs that permute themselves in place are unraveled first with the
    narrowest scratch (one cell), exactly what an elementwise swap loop
    needs.
    """
    spec0, text = _as_spec(source)
    _check(spec0)
    spec1, plan = normalize_spec(pad_and_guard(spec0), budget=1)
    bound = _bound_sources(spec1)
    nodes = [
        EnumNode(
            index=d.name,
            step=1,
            extent=d.size,
            contributes=((d.name, 1),),
        )
        for d in spec1.indexes
        if d.name not in bound
    ]
    leaf = FormulaBlock(tuple(range(len(spec1.formulas))))
    root = _chain(nodes, leaf)
    guards = tuple(
        Guard(g.left, g.right) for g in spec1.domain if isinstance(g, LessThan)
    )
    if plan.kind == "none":
        deps = extract_dependencies(spec1)
        plan = allocate_temporaries(spec1, deps, None, _point_envs(spec1))
    return ScheduleTree(
        roots=(root,), spec=spec1, source=text, guards=guards, plan=plan
    )


def build_schedule(
    source: str | ComputationSpec,
    clock: Clock | None = None,
    assignment: Mapping[str, int] | None = None,
    order: Sequence[str] | None = None,
    convolutions: int | None = None,
    unfold_over: tuple[str, int] | None = None,
    budget: int | None = None,
) -> ScheduleTree:
    """Parse, pad, rewrite, map onto a clock, plan scratch, unfold."""
    spec0, text = _as_spec(source)
    _check(spec0)
    spec1, plan = normalize_spec(pad_and_guard(spec0), budget)
    if clock is None:
        if assignment is not None:
            raise BuildError("a graduation assignment needs an explicit clock")
        total = 1
        for name in _free_names(spec1):
            total *= dict(spec1.index_sizes())[name]
        if not is_power_of_two(total):
            raise BuildError(f"domain of {total} points has no power-of-two clock")
        clock = make_clock(max(log2_exact(total), 1))
    if assignment is not None:
        mapping = mapping_from_assignment(spec1, clock, assignment)
    else:
        mapping = mapping_from_order(spec1, clock, order)
    tree = map_indexes(spec1, clock, mapping, convolutions)
    tree = replace(tree, source=text)
    if plan.kind == "none":
        from .engine import enumerate_schedule

        trace = enumerate_schedule(tree)
        names = spec1.index_names()
        envs = [dict(zip(names, r.lattice_point)) for r in trace.records]
        deps = extract_dependencies(spec1)
        plan = allocate_temporaries(spec1, deps, budget, envs)
    tree = replace(tree, plan=plan)
    if unfold_over is not None:
        tree = unfold(tree, unfold_over[0], unfold_over[1])
    return tree
