import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netmix.centralized import solve_centralized, solve_with_expansion
from netmix.instances import builtin
from netmix.mixing import propagate_mixing
from netmix.network import NetworkInstance
from netmix.rlnc import (
    FieldTooSmall,
    NoDecodableCode,
    NotPrime,
    assign_coefficients,
    build_code,
    check_field,
    identity_coefficients,
    is_prime,
    propagate_code,
    rank_mod,
    roundtrip,
    sample_code,
    smallest_prime_above,
    solve_mod,
    verify_decodable,
)
from randgraphs import random_instance


def butterfly_expanded():
    inst = builtin("butterfly")
    out = solve_with_expansion(inst)
    return inst, out.expansion, out.solution


def xor_code(inst, dem, sol):
    alpha = {pr: int(bool(v)) for pr, v in sol.beta.items()}
    return build_code(inst, dem, sol, alpha, 2)


def test_field_helpers():
    assert [n for n in range(20) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19]
    assert smallest_prime_above(3) == 5 and smallest_prime_above(1) == 2
    with pytest.raises(FieldTooSmall):
        check_field(3, 3)
    with pytest.raises(NotPrime):
        check_field(9, 2)


def test_rank_and_solve():
    assert rank_mod([[1, 2], [2, 4]], 5) == 1
    assert rank_mod([[1, 2], [2, 4]], 7) == 1
    assert rank_mod([[1, 1], [1, 2]], 2) == 2
    assert solve_mod([[1, 0], [1, 1]], [1, 1], 2) == [1, 0]
    a = [[2, 3, 1], [4, 1, 0], [1, 1, 2]]
    x = [3, 6, 2]
    rhs = [sum(r * v for r, v in zip(row, x)) % 7 for row in a]
    assert solve_mod(a, rhs, 7) == x


def test_assign_coefficients_zero_where_gate_closed():
    inst = builtin("fig3")
    rng = np.random.default_rng(0)
    assert set(assign_coefficients(inst, {}, 5, rng).values()) == {0}
    beta = dict.fromkeys(inst.adjacent_pairs, 0)
    on = inst.adjacent_pairs[:3]
    beta.update(dict.fromkeys(on, 1))
    a1 = assign_coefficients(inst, beta, 5, np.random.default_rng(3))
    a2 = assign_coefficients(inst, beta, 5, np.random.default_rng(3))
    assert a1 == a2
    assert all(a1[pr] == 0 for pr in inst.adjacent_pairs if pr not in on)
    assert all(0 <= a1[pr] < 5 for pr in on)
    with pytest.raises(FieldTooSmall):
        assign_coefficients(inst, beta, 2, rng)


def test_chain_code():
    inst = NetworkInstance.build([1, 2, 3], [(1, 2), (2, 3)], {1: 1}, [(3, {1})])
    assert propagate_code(inst, {(1, 2, 3): 1}, 5)[(2, 3)] == (1,)


def test_butterfly_xor():
    inst, dem, sol = butterfly_expanded()
    code = xor_code(inst, dem, sol)
    assert code.c[(3, 4)] == (1, 1)
    assert code.matrices[7] == [[1, 0], [1, 1]]
    assert code.matrices[8] == [[1, 1], [0, 1]]
    assert verify_decodable(inst, dem, code.c, sol, 2)
    sigma = (1, 0)
    decoded = roundtrip(inst, code, sigma)
    assert decoded == {7: {1: 1, 2: 0}, 8: {1: 1, 2: 0}}


def test_identity_routing_gives_identity_matrices():
    inst = builtin("sprint-core")
    sol = solve_centralized(inst, routing=True).solution
    alpha = identity_coefficients(inst, sol)
    code = build_code(inst, None, sol, alpha, 3)
    for t, ds in inst.demands.items():
        n = len(ds)
        assert code.matrices[t] == [[int(r == c) for c in range(n)] for r in range(n)]
    assert verify_decodable(inst, None, code.c, sol, 3)
    assert roundtrip(inst, code, (2, 1)) == {2: {1: 2, 2: 1}, 6: {2: 1}}


def test_zero_coefficients_not_decodable():
    inst = builtin("fig3")
    sol = solve_centralized(inst).solution
    code = build_code(inst, None, sol, dict.fromkeys(inst.adjacent_pairs, 0), 5)
    assert not verify_decodable(inst, None, code.c, sol, 5)


def test_sample_code_fig3_and_errors():
    inst = builtin("fig3")
    sol = solve_centralized(inst).solution
    code = sample_code(inst, None, sol, 5, 0)
    assert verify_decodable(inst, None, code.c, sol, 5)
    with pytest.raises(FieldTooSmall):
        sample_code(inst, None, sol, 2, 0)
    with pytest.raises(NoDecodableCode) as err:
        sample_code(inst, None, sol, 5, 0, max_tries=0)
    assert err.value.tries == 0


def test_exhaustive_roundtrip_fig3_and_butterfly():
    inst = builtin("fig3")
    sol = solve_centralized(inst).solution
    code = sample_code(inst, None, sol, 5, 1)
    for sigma in itertools.product(range(5), repeat=2):
        for t, got in roundtrip(inst, code, sigma).items():
            assert got == {p: sigma[p - 1] for p in inst.demands[t]}
    bfly, dem, bsol = butterfly_expanded()
    bcode = sample_code(bfly, dem, bsol, 3, 0, max_tries=500)
    for sigma in itertools.product(range(3), repeat=2):
        for t, got in roundtrip(bfly, bcode, sigma).items():
            assert got == {1: sigma[0], 2: sigma[1]}
    assert roundtrip(bfly, bcode, (0, 0)) == {7: {1: 0, 2: 0}, 8: {1: 0, 2: 0}}


def test_larger_field_decodes_more_often():
    inst = builtin("fig3")
    sol = solve_centralized(inst).solution
    rng = np.random.default_rng(12)

    def rate(q):
        hits = 0
        for _ in range(400):
            alpha = assign_coefficients(inst, sol.beta, q, rng)
            hits += verify_decodable(inst, None, propagate_code(inst, alpha, q), sol, q)
        return hits / 400

    assert rate(31) > rate(5)


def test_code_document():
    inst, dem, sol = butterfly_expanded()
    doc = xor_code(inst, dem, sol).to_dict()
    assert doc["q"] == 2
    assert {"edge": [3, 4], "vector": [1, 1]} in doc["c"]
    assert {t["node"] for t in doc["terminals"]} == {7, 8}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9), st.integers(0, 2**32 - 1))
def test_coding_support_within_mixing_support(graph_seed, seed):
    inst = random_instance(random.Random(graph_seed), max_edges=10, max_nodes=8)
    rng = np.random.default_rng(seed)
    beta = {pr: int(rng.integers(0, 2)) for pr in inst.adjacent_pairs}
    x = propagate_mixing(inst, beta)
    alpha = assign_coefficients(inst, beta, 7, rng, num_terminals=1)
    c = propagate_code(inst, alpha, 7)
    for e in inst.edges:
        support = sum(1 << k for k, v in enumerate(c[e]) if v)
        assert support & ~x[e] == 0
    for i, j in inst.edges:
        if i in inst.source_flow:
            assert c[(i, j)] == tuple(int(p == inst.source_flow[i]) for p in inst.flows)
