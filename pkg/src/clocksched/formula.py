"""Map-reduce formulas over a rectangular index space.

A computation is declared as a set of extents plus a list of formulas.
Each formula writes one array element per index point and reads a sum
of products of array accesses, for example::

    space I[2], J[2], K[2];
    a(I,J) += b(I,K)*c(K,J);

The left side must subscript by plain indexes.  Operand subscripts may
carry a non-negative displacement (``c(I+1,J)``).  Running a spec means
visiting every index point and applying every formula there; the order
of visits is exactly what the scheduler is allowed to change.

Statements:

* ``space N[s], ...;``  declare indexes and extents.
* ``domain A < B;``  restrict the index space to points with A < B.
* ``domain A = B / n;``  bind A to the n-sized block number of B.
* ``temp name, ...;``  mark arrays as scratch storage.
* ``initial`` before a formula: reads of the written array refer to
  the values held before the whole pass started.
* ``when A=v, ...`` after the operands: the formula only fires at
  points where the named indexes hold the given values.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Mapping


class SpecSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class IndexDecl:
    name: str
    size: int


@dataclass(frozen=True)
class Factor:
    """One subscript position: an index plus displacement, or a constant."""

    index: str | None
    displacement: int = 0
    exponent: int = 1


@dataclass(frozen=True)
class ArrayAccess:
    name: str
    args: tuple[Factor, ...] = ()


@dataclass(frozen=True)
class Term:
    coefficient: int = 1
    accesses: tuple[ArrayAccess, ...] = ()


@dataclass(frozen=True)
class Formula:
    result: ArrayAccess
    op: str  # "=" or "+="
    terms: tuple[Term, ...]
    when: tuple[tuple[str, int], ...] = ()
    initial_reads: bool = False

    def arrays_read(self) -> set[str]:
        return {a.name for t in self.terms for a in t.accesses}


@dataclass(frozen=True)
class LessThan:
    """Domain guard: keep points where ``left < right``.

    The bound is another index or a plain constant; constant bounds
    carve a padded power-of-two extent back down to the real one.
    """

    left: str
    right: str | int


@dataclass(frozen=True)
class BlockBind:
    """Domain guard: ``index`` equals ``source // block``."""

    index: str
    source: str
    block: int


DomainGuard = LessThan | BlockBind


@dataclass(frozen=True)
class ComputationSpec:
    indexes: tuple[IndexDecl, ...]
    formulas: tuple[Formula, ...]
    domain: tuple[DomainGuard, ...] = ()
    temp_arrays: tuple[str, ...] = ()

    def index_sizes(self) -> dict[str, int]:
        return {d.name: d.size for d in self.indexes}

    def index_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.indexes)


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"(?P<NAME>[A-Za-z_]\w*)|(?P<INT>\d+)|(?P<OP>\+=|[][(),;+\-*=^</])"
    r"|(?P<COMMENT>#[^\n]*)|(?P<WS>\s+)"
)

_KEYWORDS = {"space", "domain", "temp", "initial", "when"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise SpecSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        chunk = m.group()
        if kind not in ("WS", "COMMENT"):
            tokens.append(_Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("", "", 1, 1)
            raise SpecSyntaxError("unexpected end of input", last.line, last.col)
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.text != text:
            raise SpecSyntaxError(f"expected {text!r}, got {tok.text!r}", tok.line, tok.col)
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    def name(self) -> str:
        tok = self.next()
        if tok.kind != "NAME":
            raise SpecSyntaxError(f"expected a name, got {tok.text!r}", tok.line, tok.col)
        return tok.text

    def integer(self) -> int:
        tok = self.next()
        if tok.kind != "INT":
            raise SpecSyntaxError(f"expected a number, got {tok.text!r}", tok.line, tok.col)
        return int(tok.text)

    # statements ------------------------------------------------------

    def parse_spec(self) -> ComputationSpec:
        indexes: list[IndexDecl] = []
        formulas: list[Formula] = []
        domain: list[DomainGuard] = []
        temps: list[str] = []
        while self.peek() is not None:
            tok = self.peek()
            assert tok is not None
            if tok.text == "space":
                self.next()
                indexes.extend(self.parse_decls())
            elif tok.text == "domain":
                self.next()
                domain.append(self.parse_guard())
            elif tok.text == "temp":
                self.next()
                temps.append(self.name())
                while self.at(","):
                    self.next()
                    temps.append(self.name())
                self.expect(";")
            else:
                formulas.append(self.parse_formula())
        return ComputationSpec(
            indexes=tuple(indexes),
            formulas=tuple(formulas),
            domain=tuple(domain),
            temp_arrays=tuple(temps),
        )

    def parse_decls(self) -> list[IndexDecl]:
        decls = [self.parse_one_decl()]
        while self.at(","):
            self.next()
            decls.append(self.parse_one_decl())
        self.expect(";")
        return decls

    def parse_one_decl(self) -> IndexDecl:
        name = self.name()
        self.expect("[")
        size = self.integer()
        self.expect("]")
        return IndexDecl(name, size)

    def parse_guard(self) -> DomainGuard:
        left = self.name()
        tok = self.next()
        if tok.text == "<":
            return LessThan(left, self.right_then_semi())
        if tok.text == "=":
            source = self.name()
            self.expect("/")
            block = self.integer()
            self.expect(";")
            return BlockBind(left, source, block)
        raise SpecSyntaxError(f"expected '<' or '=', got {tok.text!r}", tok.line, tok.col)

    def right_then_semi(self) -> str | int:
        tok = self.peek()
        right: str | int
        if tok is not None and tok.kind == "INT":
            right = self.integer()
        else:
            right = self.name()
        self.expect(";")
        return right

    # formulas --------------------------------------------------------

    def parse_formula(self) -> Formula:
        initial = False
        if self.at("initial"):
            self.next()
            initial = True
        result = self.parse_access()
        tok = self.next()
        if tok.text not in ("=", "+="):
            raise SpecSyntaxError(f"expected '=' or '+=', got {tok.text!r}", tok.line, tok.col)
        op = tok.text
        terms = [self.parse_term()]
        while self.at("+"):
            self.next()
            terms.append(self.parse_term())
        when: list[tuple[str, int]] = []
        if self.at("when"):
            self.next()
            when.append(self.parse_when_pair())
            while self.at(","):
                self.next()
                when.append(self.parse_when_pair())
        self.expect(";")
        return Formula(
            result=result,
            op=op,
            terms=tuple(terms),
            when=tuple(when),
            initial_reads=initial,
        )

    def parse_when_pair(self) -> tuple[str, int]:
        name = self.name()
        self.expect("=")
        return name, self.integer()

    def parse_term(self) -> Term:
        coefficient = 1
        accesses: list[ArrayAccess] = []
        while True:
            tok = self.peek()
            assert tok is not None
            if tok.kind == "INT":
                coefficient *= self.integer()
            else:
                accesses.append(self.parse_access())
            if self.at("*"):
                self.next()
                continue
            break
        return Term(coefficient=coefficient, accesses=tuple(accesses))

    def parse_access(self) -> ArrayAccess:
        tok = self.next()
        if tok.kind != "NAME" or tok.text in _KEYWORDS:
            raise SpecSyntaxError(f"expected an array name, got {tok.text!r}", tok.line, tok.col)
        name = tok.text
        if not self.at("("):
            return ArrayAccess(name)
        self.next()
        args = [self.parse_arg()]
        while self.at(","):
            self.next()
            args.append(self.parse_arg())
        self.expect(")")
        return ArrayAccess(name, tuple(args))

    def parse_arg(self) -> Factor:
        tok = self.peek()
        assert tok is not None
        if tok.kind == "INT":
            return Factor(index=None, displacement=self.integer())
        index = self.name()
        displacement = 0
        if self.at("+") or self.at("-"):
            sign = -1 if self.next().text == "-" else 1
            displacement = sign * self.integer()
        exponent = 1
        if self.at("^"):
            self.next()
            exponent = self.integer()
        return Factor(index=index, displacement=displacement, exponent=exponent)


def parse_spec(text: str) -> ComputationSpec:
    return _Parser(text).parse_spec()


# ---------------------------------------------------------------------------
# printing

def render_factor(factor: Factor, subst: Mapping[str, str] | None = None) -> str:
    if factor.index is None:
        return str(factor.displacement)
    text = subst.get(factor.index, factor.index) if subst else factor.index
    if factor.displacement > 0:
        text += f"+{factor.displacement}"
    elif factor.displacement < 0:
        text += str(factor.displacement)
    if factor.exponent != 1:
        text += f"^{factor.exponent}"
    return text


def render_access(access: ArrayAccess, subst: Mapping[str, str] | None = None) -> str:
    if not access.args:
        return access.name
    inner = ",".join(render_factor(a, subst) for a in access.args)
    return f"{access.name}({inner})"


def render_term(term: Term, subst: Mapping[str, str] | None = None) -> str:
    parts = [render_access(a, subst) for a in term.accesses]
    if term.coefficient != 1 or not parts:
        parts.insert(0, str(term.coefficient))
    return "*".join(parts)


def render_formula(formula: Formula, subst: Mapping[str, str] | None = None) -> str:
    text = "initial " if formula.initial_reads else ""
    text += f"{render_access(formula.result, subst)} {formula.op} "
    text += " + ".join(render_term(t, subst) for t in formula.terms)
    if formula.when:
        text += " when " + ", ".join(f"{n}={v}" for n, v in formula.when)
    return text


def print_spec(spec: ComputationSpec) -> str:
    lines = []
    if spec.indexes:
        decls = ", ".join(f"{d.name}[{d.size}]" for d in spec.indexes)
        lines.append(f"space {decls};")
    for g in spec.domain:
        if isinstance(g, LessThan):
            lines.append(f"domain {g.left} < {g.right};")
        else:
            lines.append(f"domain {g.index} = {g.source} / {g.block};")
    if spec.temp_arrays:
        lines.append("temp " + ", ".join(spec.temp_arrays) + ";")
    for f in spec.formulas:
        lines.append(render_formula(f) + ";")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# static checks

def check_legality(spec: ComputationSpec) -> list[str]:
    """Model violations as human-readable strings.  Empty means legal."""
    problems = []
    sizes: dict[str, int] = {}
    for d in spec.indexes:
        if d.name in sizes:
            problems.append(f"index {d.name} declared twice")
        if d.size < 1:
            problems.append(f"index {d.name} has non-positive extent {d.size}")
        sizes[d.name] = d.size
    for g in spec.domain:
        names = (g.left, g.right) if isinstance(g, LessThan) else (g.index, g.source)
        for n in names:
            if isinstance(n, str) and n not in sizes:
                problems.append(f"domain guard names undeclared index {n}")

    arity: dict[str, int] = {}

    def visit(access: ArrayAccess, is_result: bool, where: str) -> None:
        seen = arity.setdefault(access.name, len(access.args))
        if seen != len(access.args):
            problems.append(
                f"array {access.name} used with {len(access.args)} subscripts "
                f"in {where} but {seen} elsewhere"
            )
        for a in access.args:
            if a.index is not None and a.index not in sizes:
                problems.append(f"undeclared index {a.index} in {where}")
            if a.exponent != 1:
                problems.append(f"exponent {a.exponent} on {a.index} in {where}")
            if a.displacement < 0:
                problems.append(f"negative displacement in {where}")
            elif is_result and a.index is not None and a.displacement != 0:
                problems.append(f"displaced subscript on the left side of {where}")

    for f in spec.formulas:
        where = render_formula(f)
        visit(f.result, True, where)
        for t in f.terms:
            for a in t.accesses:
                visit(a, False, where)
        for name, value in f.when:
            if name not in sizes:
                problems.append(f"when-clause names undeclared index {name}")
            elif not 0 <= value < sizes[name]:
                problems.append(f"when-clause value {name}={value} out of range")
    return problems


def infer_shapes(spec: ComputationSpec) -> dict[str, tuple[int, ...]]:
    """Array shapes from declared extents.

    A subscript position gets the extent of the index used there (the
    maximum when different formulas use different indexes), and at
    least ``c + 1`` for a constant subscript ``c``.  Displacements do
    not widen the array; reads past the edge fall off it.
    """
    sizes = spec.index_sizes()
    shapes: dict[str, list[int]] = {}

    def visit(access: ArrayAccess) -> None:
        dims = shapes.setdefault(access.name, [1] * len(access.args))
        if len(dims) != len(access.args):
            raise ValueError(f"inconsistent arity for array {access.name}")
        for i, a in enumerate(access.args):
            extent = sizes[a.index] if a.index is not None else a.displacement + 1
            dims[i] = max(dims[i], extent)

    for f in spec.formulas:
        visit(f.result)
        for t in f.terms:
            for a in t.accesses:
                visit(a)
    return {name: tuple(dims) for name, dims in shapes.items()}


# ---------------------------------------------------------------------------
# dependence structure

@dataclass(frozen=True)
class DepEdge:
    """A def-use pair on one array.

    ``vector`` is set when the read subscripts the same indexes in the
    same positions as the write; it then holds the per-position
    displacements.  ``permutation`` is set when the read permutes the
    write's indexes with no displacement; entry i names the write
    position supplying read position i.
    """

    array: str
    writer: int
    reader: int
    vector: tuple[int, ...] | None = None
    permutation: tuple[int, ...] | None = None

    @property
    def same_formula(self) -> bool:
        return self.writer == self.reader

    def cycles(self) -> tuple[tuple[int, ...], ...]:
        if self.permutation is None:
            return ()
        return permutation_cycles(self.permutation)


def permutation_cycles(perm: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """Nontrivial cycles of a permutation, each starting at its least element."""
    seen: set[int] = set()
    cycles = []
    for start in range(len(perm)):
        if start in seen:
            continue
        cycle = [start]
        seen.add(start)
        j = perm[start]
        while j != start:
            cycle.append(j)
            seen.add(j)
            j = perm[j]
        if len(cycle) > 1:
            cycles.append(tuple(cycle))
    return tuple(cycles)


def _classify_read(write: ArrayAccess, read: ArrayAccess):
    vector = None
    permutation = None
    if len(read.args) == len(write.args):
        write_names = [a.index for a in write.args]
        if all(
            r.index is not None and r.index == w and r.exponent == 1
            for r, w in zip(read.args, write_names)
        ):
            vector = tuple(r.displacement for r in read.args)
        read_names = [a.index for a in read.args]
        if (
            all(a.index is not None and a.displacement == 0 for a in read.args)
            and None not in write_names
            and len(set(write_names)) == len(write_names)
            and sorted(read_names) == sorted(write_names)
        ):
            permutation = tuple(write_names.index(r) for r in read_names)
    return vector, permutation


def extract_dependencies(spec: ComputationSpec) -> list[DepEdge]:
    """Every def-use edge between formulas, including += self-reads."""
    edges = []
    for w, fw in enumerate(spec.formulas):
        array = fw.result.name
        for r, fr in enumerate(spec.formulas):
            reads = [a for t in fr.terms for a in t.accesses if a.name == array]
            if fr is fw and fw.op == "+=":
                reads.append(fw.result)  # += reads its own target
            for access in reads:
                vector, permutation = _classify_read(fw.result, access)
                edges.append(
                    DepEdge(
                        array=array,
                        writer=w,
                        reader=r,
                        vector=vector,
                        permutation=permutation,
                    )
                )
    return edges


# ---------------------------------------------------------------------------
# the index domain

def domain_points(spec: ComputationSpec) -> list[tuple[int, ...]]:
    """Index points the spec runs over, in declaration order per axis.

    Block-bound indexes are not free: their value is derived from the
    source index.  Comparison guards filter the product of the free
    extents.  Without guards this is the whole rectangular space.
    """
    sizes = spec.index_sizes()
    names = spec.index_names()
    binds = {g.index: g for g in spec.domain if isinstance(g, BlockBind)}
    filters = [g for g in spec.domain if isinstance(g, LessThan)]
    free = [n for n in names if n not in binds]
    points = []
    for combo in itertools.product(*(range(sizes[n]) for n in free)):
        env = dict(zip(free, combo))
        for b in binds.values():
            env[b.index] = env[b.source] // b.block
        if all(
            env[g.left] < (g.right if isinstance(g.right, int) else env[g.right])
            for g in filters
        ):
            points.append(tuple(env[n] for n in names))
    return points


def applicable_formulas(spec: ComputationSpec, point: Mapping[str, int]) -> list[int]:
    """Formula positions whose when-clauses accept the point."""
    picked = []
    for i, f in enumerate(spec.formulas):
        if all(point[n] == v for n, v in f.when):
            picked.append(i)
    return picked


def access_location(access: ArrayAccess, point: Mapping[str, int]) -> tuple[int, ...]:
    """Concrete subscript tuple of an access at an index point."""
    out = []
    for factor in access.args:
        if factor.index is None:
            out.append(factor.displacement)
        else:
            out.append(point[factor.index] + factor.displacement)
    return tuple(out)


def in_bounds(loc: tuple[int, ...], shape: tuple[int, ...]) -> bool:
    return all(0 <= v < s for v, s in zip(loc, shape))
