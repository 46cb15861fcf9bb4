import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netmix.instances import builtin
from netmix.mixing import solution_cost, verify_solution
from netmix.network import NetworkInstance
from netmix.paths import (
    DisjointnessViolated,
    PathExplosion,
    SelectionEvaluator,
    build_path_table,
    derive_from_selection,
    disjoint_combinations,
    enumerate_paths,
    iter_selections,
    path_clause,
    path_nodes,
)
from randgraphs import random_instance
from test_mixing import FIG3_OPTIMAL, select


def nodes_of(paths):
    return [path_nodes(p) for p in paths]


def test_fig3_flow1_to_8():
    assert nodes_of(enumerate_paths(builtin("fig3"), 1, 8)) == [(1, 3, 8), (1, 3, 9, 11, 8)]


def test_chain_single_path():
    inst = NetworkInstance.build([1, 2, 3], [(1, 2), (2, 3)], {1: 1}, [(3, {1})])
    assert enumerate_paths(inst, 1, 3) == [((1, 2), (2, 3))]


def test_butterfly_side_and_coding_paths():
    assert nodes_of(enumerate_paths(builtin("butterfly"), 1, 7)) == [(1, 5, 3, 4, 7), (1, 5, 7)]


def test_cap_raises():
    with pytest.raises(PathExplosion):
        enumerate_paths(builtin("fig3"), 1, 8, cap=1)
    with pytest.raises(ValueError):
        enumerate_paths(builtin("fig3"), 1, 8, cap=0)


def test_fig3_t7_combinations_include_optimal_pair():
    inst = builtin("fig3")
    p1, p2 = enumerate_paths(inst, 1, 7), enumerate_paths(inst, 2, 7)
    combos = [(path_nodes(p1[a]), path_nodes(p2[b])) for a, b in disjoint_combinations([p1, p2])]
    assert ((1, 3, 4, 6, 7), (2, 5, 7)) in combos


def test_forced_shared_edge_gives_no_combination():
    inst = NetworkInstance.build([1, 2, 3, 4], [(1, 3), (2, 3), (3, 4)], {1: 1, 2: 2}, [(4, {1, 2})])
    assert disjoint_combinations([enumerate_paths(inst, 1, 4), enumerate_paths(inst, 2, 4)]) == []


def test_single_flow_gives_all_singletons():
    inst = builtin("fig3")
    paths = enumerate_paths(inst, 1, 8)
    assert disjoint_combinations([paths]) == [(0,), (1,)]


def test_fig3_optimal_beta_and_x():
    inst = builtin("fig3")
    table, sel = select(inst, FIG3_OPTIMAL)
    sol = derive_from_selection(inst, None, table, sel)
    assert sol.beta[(3, 4, 6)] == 1 and sol.beta[(5, 4, 6)] == 1
    assert sol.x[(4, 6)] == 0b11
    assert sum(sol.beta.values()) == len({(a[0], a[1], b[1]) for p in sol.paths.values() for a, b in zip(p, p[1:])})


def test_chain_unicast_derivation():
    inst = NetworkInstance.build([1, 2, 3], [(1, 2), (2, 3)], {1: 1}, [(3, {1})])
    table = build_path_table(inst)
    sol = derive_from_selection(inst, None, table, {(1, 3): 0})
    assert sol.z == {(1, 2): 1, (2, 3): 1}
    assert sol.f == {(3, 1, (1, 2)): 1, (3, 1, (2, 3)): 1}
    assert sol.beta == {(1, 2, 3): 1}


def test_overlap_within_terminal_rejected():
    inst = NetworkInstance.build([1, 2, 3, 4, 5], [(1, 3), (2, 3), (3, 4), (1, 4), (4, 5)], {1: 1, 2: 2}, [(5, {1, 2})])
    table = build_path_table(inst)
    with pytest.raises(DisjointnessViolated):
        derive_from_selection(inst, None, table, {(1, 5): 0, (2, 5): 0})
    assert path_clause(inst, None, table, {(1, 5): 0, (2, 5): 0}, (1, 5)) == 0


def test_fig3_optimal_clauses_hold():
    inst = builtin("fig3")
    table, sel = select(inst, FIG3_OPTIMAL)
    assert all(path_clause(inst, None, table, sel, key) == 1 for key in sel)


def test_butterfly_through_coding_point_fails_purity():
    inst = builtin("butterfly")
    table = build_path_table(inst)
    sel = {key: 0 for key in table.paths}  # lexicographically first = through node 3
    assert all(path_nodes(table.paths[k][0])[1:4] in ((6, 3, 4), (5, 3, 4)) for k in sel)
    assert path_clause(inst, None, table, sel, (2, 7)) == 0


def brute_path_count(inst, s, t):
    g = nx.DiGraph(list(inst.edges))
    g.add_nodes_from(inst.nodes)
    return sum(1 for _ in nx.all_simple_paths(g, s, t))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_path_count_matches_brute_force(seed):
    inst = random_instance(random.Random(seed), max_edges=14, max_nodes=8)
    for s in inst.nodes:
        for t in inst.nodes:
            if s != t:
                assert len(enumerate_paths(inst, s, t)) == brute_path_count(inst, s, t)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_clean_clauses_imply_clean_solution_and_union_cost(seed):
    inst = random_instance(random.Random(seed))
    table = build_path_table(inst)
    ev = SelectionEvaluator(inst, None, table)
    for sel in iter_selections(table):
        used = {e for k, i in sel.items() for e in table.paths[k][i]}
        if ev.feasible(sel):
            sol = derive_from_selection(inst, None, table, sel)
            assert verify_solution(inst, None, sol) == []
            assert solution_cost(inst, sol.z) == sum(inst.cost_of[e] for e in used)
            assert all(path_clause(inst, None, table, sel, k) for k in sel)
