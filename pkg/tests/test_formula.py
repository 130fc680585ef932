"""Spec parsing, printing, legality, shapes, domains, dependencies."""

from __future__ import annotations

import pytest

from clocksched.formula import (
    ArrayAccess,
    BlockBind,
    ComputationSpec,
    Factor,
    Formula,
    IndexDecl,
    LessThan,
    SpecSyntaxError,
    Term,
    access_location,
    applicable_formulas,
    check_legality,
    domain_points,
    extract_dependencies,
    in_bounds,
    infer_shapes,
    parse_spec,
    permutation_cycles,
    print_spec,
)

import oracles

MATMUL = "space I[2], J[2], K[2];\na(I,J) += b(I,K)*c(K,J);\n"
TRANSPOSE = "space I[4], J[4];\na(I,J) = a(J,I);\n"


def test_parse_matmul_structure():
    spec = parse_spec(MATMUL)
    assert [d.name for d in spec.indexes] == ["I", "J", "K"]
    assert spec.index_sizes() == {"I": 2, "J": 2, "K": 2}
    (f,) = spec.formulas
    assert f.op == "+="
    assert f.result == ArrayAccess("a", (Factor("I"), Factor("J")))
    (term,) = f.terms
    assert term.coefficient == 1
    assert [a.name for a in term.accesses] == ["b", "c"]


def test_parse_displacements_and_coefficients():
    spec = parse_spec("space I[4];\nr(I) = 2*a(I+1) + a(I-1) + 3;\n")
    (f,) = spec.formulas
    assert f.terms[0].coefficient == 2
    assert f.terms[0].accesses[0].args[0].displacement == 1
    assert f.terms[1].accesses[0].args[0].displacement == -1
    assert f.terms[2] == Term(3, ())


def test_parse_domain_guards():
    spec = parse_spec(
        "space I[4], J[4], T[2];\n"
        "domain J < I;\n"
        "domain T = I / 2;\n"
        "temp tmp;\n"
        "a(I,J) = a(J,I);\n"
    )
    assert LessThan("J", "I") in spec.domain
    assert BlockBind("T", "I", 2) in spec.domain
    assert spec.temp_arrays == ("tmp",)


def test_parse_int_bound_guard():
    spec = parse_spec("space I[8];\ndomain I < 5;\nb(I) = a(I);\n")
    assert LessThan("I", 5) in spec.domain
    assert len(domain_points(spec)) == 5


def test_parse_when_and_initial():
    spec = parse_spec(
        "space I[2], J[2];\n"
        "initial b(I,J) = a(I,J) when I=1, J=0;\n"
    )
    (f,) = spec.formulas
    assert f.initial_reads
    assert f.when == (("I", 1), ("J", 0))
    assert applicable_formulas(spec, {"I": 1, "J": 0}) == [0]
    assert applicable_formulas(spec, {"I": 0, "J": 0}) == []


def test_print_parse_round_trip():
    sources = [
        MATMUL,
        TRANSPOSE,
        "space I[4], J[4], T[2];\ndomain J < I;\ndomain T = I / 2;\n"
        "temp tmp;\ntmp(T) = a(I,J);\na(I,J) = a(J,I);\na(J,I) = tmp(T);\n",
        "space I[8];\ndomain I < 5;\nb(I) = 2*a(I+1) + 1;\n",
        "space I[2];\ninitial b(I) = a(I) when I=1;\n",
    ]
    for source in sources:
        spec = parse_spec(source)
        assert parse_spec(print_spec(spec)) == spec


def test_syntax_errors_carry_position():
    with pytest.raises(SpecSyntaxError) as info:
        parse_spec("space I[2]\na(I) = b(I);\n")
    assert info.value.line >= 1
    with pytest.raises(SpecSyntaxError):
        parse_spec("space I[2];\na(I) ~ b(I);\n")


def test_legality_flags_problems():
    spec = parse_spec("space I[2];\na(I,J) = b(I);\n")
    problems = check_legality(spec)
    assert any("J" in p for p in problems)

    dup = parse_spec("space I[2], I[4];\na(I) = b(I);\n")
    assert any("twice" in p for p in check_legality(dup))

    clean = parse_spec(MATMUL)
    assert check_legality(clean) == []


def test_legality_catches_arity_clash():
    spec = parse_spec("space I[2], J[2];\na(I,J) = a(I);\n")
    assert any("subscript" in p for p in check_legality(spec))


def test_infer_shapes():
    spec = parse_spec(MATMUL)
    assert infer_shapes(spec) == {"a": (2, 2), "b": (2, 2), "c": (2, 2)}
    spec2 = parse_spec("space I[4];\nS += a(I);\n")
    assert infer_shapes(spec2) == {"S": (), "a": (4,)}
    spec3 = parse_spec("space I[2];\nb(I) = s(0) + s(1);\n")
    assert infer_shapes(spec3)["s"] == (2,)


def test_domain_points_rectangular_matches_product():
    spec = parse_spec(MATMUL)
    assert domain_points(spec) == oracles.lex_points([2, 2, 2])


def test_domain_points_triangular():
    spec = parse_spec("space I[4], J[4];\ndomain J < I;\na(I,J) = a(J,I);\n")
    points = domain_points(spec)
    assert len(points) == 6
    assert all(j < i for i, j in points)


def test_domain_points_block_bound():
    spec = parse_spec(
        "space T[2], I[4];\ndomain T = I / 2;\nb(T,I) = a(T,I);\n"
    )
    points = domain_points(spec)
    assert points == [(0, 0), (0, 1), (1, 2), (1, 3)]


def test_access_location_and_bounds():
    point = {"I": 2, "J": 1}
    assert access_location(ArrayAccess("a", (Factor("I", 1), Factor("J"))), point) == (3, 1)
    assert access_location(ArrayAccess("s", (Factor(None, 1),)), point) == (1,)
    assert in_bounds((3, 1), (4, 4))
    assert not in_bounds((4, 0), (4, 4))


def test_dependencies_matmul_self_accumulation():
    spec = parse_spec(MATMUL)
    edges = extract_dependencies(spec)
    (edge,) = edges
    assert edge.array == "a"
    assert edge.same_formula
    assert edge.vector == (0, 0)


def test_dependencies_transpose_permutation():
    spec = parse_spec(TRANSPOSE)
    (edge,) = extract_dependencies(spec)
    assert edge.permutation == (1, 0)
    assert edge.cycles() == ((0, 1),)


def test_permutation_cycles():
    assert permutation_cycles((1, 0, 2)) == ((0, 1),)
    assert permutation_cycles((1, 2, 0)) == ((0, 1, 2),)
    assert permutation_cycles((0, 1)) == ()


def test_stencil_vector_dependencies():
    spec = parse_spec(
        "space I[4], J[4];\n"
        "a(I,J) = a(I,J) + a(I+1,J) + a(I,J+1) + a(I+1,J+1);\n"
    )
    vectors = {e.vector for e in extract_dependencies(spec)}
    assert vectors == {(0, 0), (1, 0), (0, 1), (1, 1)}


def test_spec_construction_equivalence():
    built = ComputationSpec(
        indexes=(IndexDecl("I", 2),),
        formulas=(
            Formula(
                result=ArrayAccess("b", (Factor("I"),)),
                op="=",
                terms=(Term(1, (ArrayAccess("a", (Factor("I"),)),)),),
            ),
        ),
    )
    assert parse_spec("space I[2];\nb(I) = a(I);\n") == built
