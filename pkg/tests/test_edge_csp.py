import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netmix.centralized import brute_force_oracle
from netmix.cfl import CflParams
from netmix.edge_csp import (
    DomainExplosion,
    EdgeCsp,
    clause_partition,
    correct_events,
    edge_restart_loop,
    enumerate_domain,
    phi_f,
    phi_x,
    solve_edge_cfl,
)
from netmix.instances import builtin
from netmix.mixing import solution_cost, verify_solution
from netmix.network import NetworkInstance, as_demands
from netmix.paths import SelectionEvaluator, build_path_table, iter_selections
from randgraphs import random_instance
from test_mixing import fig3_optimal


def brute_domain(instance, edge):
    """Every (f, x) on one edge meeting the local constraints, by exhaustion."""
    dem = as_demands(instance)
    cols = [(t, p) for t, ds in dem.items() for p in sorted(ds)]
    i, j = edge
    members = set()
    for bits in itertools.product((0, 1), repeat=len(cols)):
        for x in range(1 << instance.num_flows):
            f = dict(zip(cols, bits))
            if any(v and not x >> (p - 1) & 1 for (t, p), v in f.items()):
                continue
            if i in instance.source_flow and x != 1 << (instance.source_flow[i] - 1):
                continue
            if any(sum(f[(t, p)] for p in dem[t]) > 1 for t in dem):
                continue
            if j in dem and any(f[(j, p)] for p in dem[j]) and any(x >> (p - 1) & 1 for p in instance.flows if p not in dem[j]):
                continue
            members.add((bits, x))
    return members


def domain_members(dom):
    return {(tuple(int(v) for v in row), int(x)) for row, x in zip(dom.f, dom.x)}


@pytest.mark.parametrize("edge", [(4, 6), (1, 3), (3, 8), (6, 7), (9, 10)])
def test_fig3_domains_match_brute_force(edge):
    inst = builtin("fig3")
    dom = enumerate_domain(inst, None, edge)
    assert domain_members(dom) == brute_domain(inst, edge)
    assert len(domain_members(dom)) == len(dom)


def test_fig3_edge_4_6():
    dom = enumerate_domain(builtin("fig3"), None, (4, 6))
    assert len(dom) == 31
    cols = dom.columns
    want = tuple(int(c in {(7, 1), (10, 2)}) for c in cols)
    assert (want, 0b11) in domain_members(dom)


def test_source_edge_fixed_x():
    dom = enumerate_domain(builtin("fig3"), None, (1, 3))
    assert set(dom.x.tolist()) == {0b01}


def test_delivering_terminal_edge_is_pure():
    inst = builtin("fig3")
    dom = enumerate_domain(inst, None, (3, 8))
    col = dom.columns.index((8, 1))
    delivering = dom.x[dom.f[:, col] == 1]
    assert len(delivering) and all(x & 0b10 == 0 for x in delivering.tolist())


def test_domain_cap():
    with pytest.raises(DomainExplosion):
        enumerate_domain(builtin("fig3"), None, (4, 6), cap=30)
    with pytest.raises(ValueError):
        enumerate_domain(builtin("fig3"), None, (4, 6), cap=0)


def test_phi_f_cases():
    inst, sol = fig3_optimal()
    assert phi_f(inst, None, 1, sol.f) == 1
    assert phi_f(inst, None, 4, sol.f) == 1
    f = dict(sol.f)
    del f[(7, 1, (4, 6))]
    assert phi_f(inst, None, 4, f) == 0


def test_phi_x_cases():
    assert phi_x(0, [0b01, 0b11]) == 1
    assert phi_x(0b11, [0b01, 0b10]) == 1
    assert phi_x(0b01, [0b11]) == 0
    assert phi_x(0b01, []) == 0


def fx(*names):
    return {("x", n) for n in names}


def test_clause_partition_fig3():
    inst = builtin("fig3")
    assert clause_partition(inst, (1, 3)) == {("f", 1), ("f", 3)} | fx(*[(3, k) for k in inst.out_neighbors[3]])
    assert clause_partition(inst, (6, 7)) == {("f", 6), ("f", 7), ("x", (6, 7))}
    assert clause_partition(inst, (4, 6)) == {("f", 4), ("f", 6), ("x", (4, 6)), ("x", (6, 7)), ("x", (6, 10))}
    with pytest.raises(KeyError):
        clause_partition(inst, (7, 6))


def test_single_edge_unicast():
    inst = NetworkInstance.build([1, 2], [(1, 2, 3)], {1: 1}, [(2, {1})])
    csp = EdgeCsp(inst)
    assert csp.domain_sizes == [2]
    for seed in range(20):
        run = solve_edge_cfl(inst, None, CflParams(seed=seed), csp=csp)
        assert run.converged and run.cost == 3


def test_fig3_edge_run():
    inst = builtin("fig3")
    run = solve_edge_cfl(inst, None, CflParams(1.0, 0.01, 20000, 0), record_history=True)
    assert run.converged
    assert verify_solution(inst, None, run.solution) == []
    assert run.cost in (11, 12) and run.cost == solution_cost(inst, run.solution.z)
    events = correct_events(run)
    assert len(events) == run.result.iterations * len(inst.edges)
    last = [ok for it, _, _, ok in events if it == run.result.iterations]
    assert all(last)


def test_unsatisfiable_restarts():
    inst = NetworkInstance.build([1, 2, 3, 4], [(1, 3), (2, 3), (3, 4)], {1: 1, 2: 2}, [(4, {1, 2})])
    out = edge_restart_loop(inst, None, CflParams(max_iterations=100, seed=0), 3)
    assert not out.best.feasible and out.costs == [None] * 3


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9), st.data())
def test_participation_covers_every_flippable_clause(seed, data):
    inst = random_instance(random.Random(seed), max_edges=7, max_flows=2, max_terminals=2)
    csp = EdgeCsp(inst, None, 512)
    part = csp.participation()
    base = np.array([data.draw(st.integers(0, n - 1)) for n in csp.domain_sizes], dtype=np.int64)
    m = data.draw(st.integers(0, len(base) - 1))
    before = csp.clause_values(base)
    for v in range(csp.domain_sizes[m]):
        moved = base.copy()
        moved[m] = v
        changed = set(np.flatnonzero(csp.clause_values(moved) != before).tolist())
        assert changed <= set(part[m])


def feasible_edge_costs(inst, csp):
    costs = set()
    for assignment in itertools.product(*(range(n) for n in csp.domain_sizes)):
        a = np.array(assignment, dtype=np.int64)
        if csp.clause_values(a).all():
            sol = csp.assemble(a)
            assert verify_solution(inst, None, sol) == []
            costs.add(solution_cost(inst, sol.z))
    return costs


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_edge_and_path_encodings_reach_the_same_costs(seed):
    inst = random_instance(random.Random(seed), max_edges=7, max_flows=2, max_terminals=2, max_nodes=6)
    csp = EdgeCsp(inst, None, 512)
    if np.prod(csp.domain_sizes, dtype=float) > 20_000:
        return
    table = build_path_table(inst)
    ev = SelectionEvaluator(inst, None, table)
    path_costs = {ev.cost(s) for s in iter_selections(table) if ev.feasible(s)}
    assert feasible_edge_costs(inst, csp) == path_costs
    ref = brute_force_oracle(inst)
    assert (min(path_costs) if path_costs else None) == ref.cost
