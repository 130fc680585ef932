"""Visit traces for dense nests and slot packing for sparse graphs."""

from __future__ import annotations

import pytest

from clocksched.clock import clock_point_tuples, make_clock
from clocksched.engine import (
    SparseGraph,
    enumerate_schedule,
    enumerate_sparse,
    parse_edge_list,
)
from clocksched.formula import domain_points

import cases
import oracles

TREE_EDGES = "0 1\n0 2\n1 3\n1 4\n2 5\n2 6\n"


def test_skeleton_trace_counts_in_time_order():
    trace = enumerate_schedule(cases.skeleton_plain())
    assert [r.time_value for r in trace.records] == list(range(8))
    assert [r.time_point for r in trace.records] == clock_point_tuples(make_clock(3))
    assert [r.seq for r in trace.records] == list(range(8))


def test_skeleton_colors():
    trace = enumerate_schedule(cases.skeleton_plain())
    assert [r.color for r in trace.records] == [3, 0, 1, 0, 2, 0, 1, 0]
    assert trace.color_bits == 3


def test_unconvolved_levels_stay_flat():
    trace = enumerate_schedule(cases.skeleton_plain())
    assert {r.level for r in trace.records} == {0}


def test_convolved_levels_track_inner_motion():
    trace = enumerate_schedule(cases.skeleton_convolved())
    assert [r.time_value for r in trace.records] == list(range(8))
    assert [r.level for r in trace.records] == [0, 1, 1, 2, 0, 1, 1, 2]


def test_composed_chain_covers_the_full_span():
    trace = enumerate_schedule(cases.composed_6clock())
    assert [r.time_value for r in trace.records] == list(range(64))


def test_matmul_lattice_recovery():
    trace = enumerate_schedule(cases.matmul_tree())
    spec = trace.spec
    got = sorted(tuple(p[n] for n in spec.index_names()) for p in trace.points())
    assert got == domain_points(spec)
    # outer wheel carries K, so K is slowest
    assert [p["K"] for p in trace.points()] == [0, 0, 0, 0, 1, 1, 1, 1]


def test_form_group_walks_the_member_product():
    trace = enumerate_schedule(cases.matmul_form_tree())
    assert [r.time_value for r in trace.records] == list(range(8))
    spec = trace.spec
    got = sorted(tuple(p[n] for n in spec.index_names()) for p in trace.points())
    assert got == domain_points(spec)


def test_guards_filter_visits():
    trace = enumerate_schedule(cases.transpose_tree())
    points = trace.points()
    assert len(points) == 6
    assert all(p["J"] < p["I"] for p in points)
    assert all(p["T"] == p["I"] // 2 for p in points)


def test_stencil_trace_spacing():
    trace = enumerate_schedule(cases.stencil_tree())
    assert [r.time_value for r in trace.records] == list(range(0, 32, 2))
    got = sorted((p["I"], p["J"]) for p in trace.points())
    assert got == oracles.lex_points([4, 4])


def test_unfold_copies_partition_the_lattice():
    trace = enumerate_schedule(cases.transpose_unfold_tree())
    rows = {}
    for r in trace.records:
        rows.setdefault(r.copy, set()).add(r.lattice_point[1])  # I component
    assert rows == {0: {1}, 1: {2, 3}}  # J<I leaves row 0 empty in copy 0
    assert all(r.time_value >= 8 for r in trace.records if r.copy == 1)


def test_epilogue_record_trails_the_trace():
    trace = enumerate_schedule(cases.accumulator_tree())
    *body, last = trace.records
    assert last.epilogue
    assert last.time_value == max(r.time_value for r in body) + 1
    assert not any(r.epilogue for r in body)
    assert last.lattice_point == ()


def test_trace_points_skip_the_epilogue():
    trace = enumerate_schedule(cases.accumulator_tree())
    assert len(trace.points()) == len(trace.records) - 1


# -- sparse ------------------------------------------------------------------

def test_parse_edge_list():
    graph = parse_edge_list("# balanced tree\n0 1\n\n0 2  # fan out\n1 3\n")
    assert graph.count == 4
    assert graph.edges == ((0, 1), (0, 2), (1, 3))


def test_parse_edge_list_rejects_garbage():
    with pytest.raises(ValueError, match="expected 'u v'"):
        parse_edge_list("0 1 2\n")
    with pytest.raises(ValueError, match="integers"):
        parse_edge_list("a b\n")
    with pytest.raises(ValueError, match="non-negative"):
        parse_edge_list("0 -1\n")
    with pytest.raises(ValueError, match="empty"):
        parse_edge_list("# nothing\n")


def test_sparse_dfs_matches_preorder_oracle():
    graph = parse_edge_list(TREE_EDGES)
    records = enumerate_sparse(graph, make_clock(2))
    assert [r.vertex for r in records] == oracles.plain_dfs(graph.edges, 0)


def test_sparse_bfs_matches_level_oracle():
    graph = parse_edge_list(TREE_EDGES)
    records = enumerate_sparse(graph, make_clock(2), bfs=True)
    assert [r.vertex for r in records] == oracles.plain_bfs(graph.edges, 0)


def test_sparse_unit_packing():
    graph = parse_edge_list(TREE_EDGES)
    records = enumerate_sparse(graph, make_clock(2))
    units = {}
    for r in records:
        units.setdefault(r.unit_index, []).append(r.vertex)
    assert units == {0: [0, 1, 3, 4], 1: [2, 5, 6]}
    assert [r.time_value for r in records] == [0, 1, 2, 3, 4, 5, 6]
    assert [r.slot for r in records] == [0, 1, 2, 3, 0, 1, 2]


def test_sparse_colors_follow_slot_ticks():
    graph = parse_edge_list(TREE_EDGES)
    records = enumerate_sparse(graph, make_clock(2))
    assert [r.color for r in records] == [2, 0, 1, 0, 2, 0, 1]


def test_sparse_rejects_cycles():
    graph = SparseGraph(count=3, edges=((0, 1), (1, 2), (2, 0)))
    with pytest.raises(ValueError, match="cycle through edge 2 -> 0"):
        enumerate_sparse(graph, make_clock(1))


def test_sparse_rejects_unreachable_vertexes():
    graph = SparseGraph(count=4, edges=((0, 1), (2, 3)))
    with pytest.raises(ValueError, match=r"reach vertexes \[2, 3\]"):
        enumerate_sparse(graph, make_clock(1))
