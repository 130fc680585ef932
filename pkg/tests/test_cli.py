"""End-to-end runs of the command line, one process-free call each."""

from __future__ import annotations

import json

import pytest

from clocksched.cli import main

import cases

TREE_EDGES = "0 1\n0 2\n1 3\n1 4\n2 5\n2 6\n"


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "matmul.spec"
    path.write_text(cases.MATMUL)
    return str(path)


def transform(tmp_path, capsys, spec_text, *flags):
    spec = tmp_path / "input.spec"
    spec.write_text(spec_text)
    out = tmp_path / "schedule.json"
    code = main(["transform", str(spec), *flags, "-o", str(out)])
    assert code == 0, capsys.readouterr().err
    capsys.readouterr()
    return str(out)


def test_parse_prints_canonical_form(capsys, spec_file):
    code, out, err = run(capsys, "parse", spec_file)
    assert code == 0
    assert out == cases.MATMUL
    assert err == ""


def test_parse_reports_problems(capsys, tmp_path):
    bad = tmp_path / "bad.spec"
    bad.write_text("space I[2];\na(I,J) = b(I);\n")
    code, out, err = run(capsys, "parse", str(bad))
    assert code == 1
    assert out == ""
    assert "problem:" in err


def test_parse_syntax_error_exits_2(capsys, tmp_path):
    bad = tmp_path / "bad.spec"
    bad.write_text("space I[2]\n")
    code, _, err = run(capsys, "parse", str(bad))
    assert code == 2
    assert err.startswith("error:")


def test_missing_file_exits_2(capsys):
    code, _, err = run(capsys, "parse", "/nonexistent/path.spec")
    assert code == 2
    assert "error:" in err


def test_transform_writes_a_schedule_document(tmp_path, capsys):
    path = transform(
        tmp_path, capsys, cases.MATMUL, "--clock", "3x2", "--map", "K=8,I=4,J=2"
    )
    doc = json.loads(open(path).read())
    assert doc["format"] == "clocksched-schedule"
    assert doc["clock"]["span"] == 8


def test_transform_emit_verify_pipeline(tmp_path, capsys):
    path = transform(
        tmp_path, capsys, cases.MATMUL, "--clock", "3x2", "--map", "K=8,I=4,J=2"
    )
    code, out, _ = run(capsys, "emit", path)
    assert code == 0
    assert out.startswith("for (K=0;K<8;K+=4)")

    code, out, _ = run(capsys, "verify", path, "--trials", "3")
    assert code == 0
    assert "coverage: ok" in out
    assert "dependencies: ok" in out
    assert "equivalence: ok" in out
    assert out.rstrip().endswith("verdict: pass")


def test_transform_budget_and_unfold(tmp_path, capsys):
    path = transform(
        tmp_path,
        capsys,
        cases.TRANSPOSE,
        "--clock", "4x2",
        "--map", "I=16,J=4",
        "--temp-budget", "2",
        "--unfold", "T=2",
    )
    code, out, _ = run(capsys, "verify", path, "--trials", "3")
    assert code == 0
    assert "verdict: pass" in out


def test_transform_convolutions_flag(tmp_path, capsys):
    path = transform(
        tmp_path, capsys, cases.MNPQ, "--clock", "4x2",
        "--map", "M=8,N=4,P=2,Q=1", "--convolutions", "3",
    )
    code, out, _ = run(capsys, "emit", path)
    assert code == 0
    assert "for (N=M;" in out


def test_transform_rejects_infeasible_budget(tmp_path, capsys):
    spec = tmp_path / "t.spec"
    spec.write_text(cases.TRANSPOSE)
    code, _, err = run(
        capsys, "transform", str(spec), "--clock", "3x2",
        "--map", "T=8,I=4,J=2", "--temp-budget", "0",
    )
    assert code == 2
    assert "error:" in err and "1" in err


def test_verify_fails_on_a_corrupted_schedule(tmp_path, capsys):
    path = transform(
        tmp_path, capsys, cases.STENCIL, "--clock", "4x2x2",
        "--map", "S=16,I=8,T=4,J=2",
    )
    doc = json.loads(open(path).read())
    doc["plan"] = {"kind": "none", "locations": 0, "width": 1,
                   "array": None, "snapshot_locs": [], "slots": [], "minimal": 0}
    open(path, "w").write(json.dumps(doc))
    code, out, _ = run(capsys, "verify", path, "--trials", "3")
    assert code == 1
    assert "verdict: FAIL" in out


def test_emit_notation_flag(tmp_path, capsys):
    path = transform(
        tmp_path, capsys, cases.MATMUL, "--clock", "3x2", "--map", "K=8,I=4,J=2"
    )
    code, out, _ = run(capsys, "emit", path, "--notation", "enum")
    assert code == 0
    assert out.startswith("enum(K,4,[0,8))")


def test_analyze_emits_json(tmp_path, capsys):
    path = transform(
        tmp_path, capsys, cases.MATMUL, "--clock", "3x2", "--map", "K=8,I=4,J=2"
    )
    code, out, _ = run(capsys, "analyze", path)
    assert code == 0
    data = json.loads(out)
    assert data["widths"] == [1, 2, 4]
    assert data["points"] == 8


def test_sparse_listing(tmp_path, capsys):
    edges = tmp_path / "tree.edges"
    edges.write_text(TREE_EDGES)
    code, out, _ = run(capsys, "sparse", str(edges), "--unit", "2x2")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "vertex 0 unit 0 slot 0 time 0 color 2"
    assert lines[-1] == "vertexes 7 units 2"


def test_sparse_bfs_flag(tmp_path, capsys):
    edges = tmp_path / "tree.edges"
    edges.write_text(TREE_EDGES)
    code, out, _ = run(capsys, "sparse", str(edges), "--unit", "2x2", "--bfs")
    assert code == 0
    order = [int(l.split()[1]) for l in out.splitlines()[:-1]]
    assert order == [0, 1, 2, 3, 4, 5, 6]


def test_sparse_cycle_exits_2(tmp_path, capsys):
    edges = tmp_path / "c.edges"
    edges.write_text("0 1\n1 0\n")
    code, _, err = run(capsys, "sparse", str(edges))
    assert code == 2
    assert "cycle" in err


def test_bad_clock_argument(capsys, spec_file):
    with pytest.raises(SystemExit) as info:
        main(["transform", spec_file, "--clock", "banana"])
    assert info.value.code == 2
    assert "banana" in capsys.readouterr().err


def test_stdin_input(capsys, monkeypatch):
    import io

    monkeypatch.setattr("sys.stdin", io.StringIO(cases.MATMUL))
    code, out, _ = run(capsys, "parse", "-")
    assert code == 0
    assert out == cases.MATMUL
