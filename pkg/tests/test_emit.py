"""Rendered notations against golden files, plus the JSON round trip."""

from __future__ import annotations

import json
import pathlib

import pytest

from clocksched.emit import emit, schedule_from_json, schedule_to_json

import cases

GOLDEN = pathlib.Path(__file__).parent / "golden"


def golden(name: str) -> str:
    return (GOLDEN / name).read_text()


@pytest.mark.parametrize(
    "name,build",
    [
        ("skeleton_plain.txt", cases.skeleton_plain),
        ("skeleton_convolved.txt", cases.skeleton_convolved),
        ("composed_6clock.txt", cases.composed_6clock),
        ("mnpq.txt", cases.mnpq_tree),
        ("matmul.txt", cases.matmul_tree),
        ("matmul_form.txt", cases.matmul_form_tree),
        ("stencil.txt", cases.stencil_tree),
        ("transpose_4x4.txt", cases.transpose_tree),
        ("transpose_sequential.txt", cases.transpose_sequential_tree),
        ("transpose_unfold.txt", cases.transpose_unfold_tree),
        ("accumulator_unfold.txt", cases.accumulator_tree),
    ],
)
def test_for_notation_matches_golden(name, build):
    assert emit(build()) == golden(name)


def test_enum_notation():
    assert emit(cases.skeleton_convolved(), notation="enum") == golden(
        "skeleton_convolved_enum.txt"
    )


def test_enum_notation_is_one_line_per_block():
    text = emit(cases.matmul_tree(), notation="enum").strip()
    assert "\n" not in text
    assert text.count("enum(") == 3


def test_form_notation_brackets_every_loop():
    text = emit(cases.matmul_form_tree(), notation="form")
    head, rest = text.split("\n", 1)
    assert head.startswith("form [(K=0;K<8;K+=4)")
    assert "]" in rest
    assert text.endswith("b(I-K,K/4)*c(K/4,J-K)\n")


def test_unknown_notation_is_rejected():
    with pytest.raises(ValueError):
        emit(cases.matmul_tree(), notation="dot")


def test_guard_lines_indent_progressively():
    tree = cases.transpose_tree()
    lines = emit(tree).splitlines()
    guard = next(l for l in lines if l.strip().startswith("if"))
    body = lines[lines.index(guard) + 1]
    assert len(body) - len(body.lstrip()) > len(guard) - len(guard.lstrip())


def test_count_one_loop_folds_to_a_constant():
    # each unfolded copy pins its half of the outer digit range
    text = emit(cases.accumulator_tree())
    assert "s(0)" in text and "s(1)" in text
    assert "a(0," in text and "a(1," in text


@pytest.mark.parametrize(
    "build",
    [
        cases.skeleton_plain,
        cases.skeleton_convolved,
        cases.composed_6clock,
        cases.matmul_tree,
        cases.matmul_form_tree,
        cases.stencil_tree,
        cases.transpose_tree,
        cases.transpose_unfold_tree,
        cases.transpose_sequential_tree,
        cases.accumulator_tree,
    ],
)
def test_json_round_trip_is_exact(build):
    tree = build()
    doc = schedule_to_json(tree)
    assert schedule_from_json(doc) == tree


def test_json_document_is_serializable():
    doc = schedule_to_json(cases.transpose_unfold_tree())
    text = json.dumps(doc)
    assert schedule_from_json(json.loads(text)) == cases.transpose_unfold_tree()


def test_json_header_fields():
    doc = schedule_to_json(cases.matmul_tree())
    assert doc["format"] == "clocksched-schedule"
    assert doc["version"] == 1
    assert doc["source"] == cases.MATMUL
    assert doc["clock"] == {"graduations": [4, 2, 1], "rate": 2, "span": 8}


def test_json_rejects_foreign_documents():
    doc = schedule_to_json(cases.matmul_tree())
    with pytest.raises(ValueError, match="not a schedule"):
        schedule_from_json({**doc, "format": "something-else"})
    with pytest.raises(ValueError, match="version"):
        schedule_from_json({**doc, "version": 2})
