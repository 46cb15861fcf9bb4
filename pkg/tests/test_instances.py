import json

import pytest

from netmix.instances import (
    BUILTINS,
    BadConfig,
    DemandGenConfig,
    InstanceSyntaxError,
    UnknownTopology,
    ValidationFailed,
    builtin,
    instance_to_dict,
    load_instance,
    parse_instance,
    random_demands,
    serialize_instance,
    write_solution,
)
from netmix.centralized import solve_centralized, solve_with_expansion


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtin_roundtrip(name):
    inst = builtin(name)
    again = parse_instance(serialize_instance(inst))
    assert instance_to_dict(again) == instance_to_dict(inst)
    assert serialize_instance(again) == serialize_instance(inst)


def butterfly_doc():
    return json.loads(serialize_instance(builtin("butterfly")))


def test_parallel_edge_document_rejected():
    doc = butterfly_doc()
    doc["edges"].append({"from": 1, "to": 5, "cost": 1})
    with pytest.raises(ValidationFailed) as err:
        parse_instance(json.dumps(doc))
    assert "parallel edge" in str(err.value)


def test_unknown_demanded_flow_is_syntax_error():
    doc = butterfly_doc()
    doc["terminals"][0]["demands"] = [7]
    with pytest.raises(InstanceSyntaxError) as err:
        parse_instance(json.dumps(doc))
    assert err.value.position == "$.terminals[0].demands[0]"


def test_malformed_json_reports_position():
    with pytest.raises(InstanceSyntaxError) as err:
        parse_instance('{"nodes": [1, 2,]}')
    assert "line 1" in err.value.position


def test_fractional_costs_survive():
    doc = butterfly_doc()
    doc["edges"][0]["cost"] = "3/7"
    inst = parse_instance(json.dumps(doc))
    assert parse_instance(serialize_instance(inst)).cost_of[(1, 5)] == inst.cost_of[(1, 5)]


def test_fig3_demands():
    inst = builtin("fig3")
    assert inst.demands == {8: frozenset({1}), 7: frozenset({1, 2}), 10: frozenset({1, 2})}


def test_butterfly_single_coding_point():
    inst = builtin("butterfly")
    coding = [
        n for n in inst.nodes if len(inst.in_neighbors[n]) == 2 and len(inst.out_neighbors[n]) == 1 and n not in inst.demands
    ]
    assert coding == [3]
    assert tuple(inst.out_neighbors[3]) == (4,)


def test_sprint_core_costs_and_path_edges():
    inst = builtin("sprint-core")
    assert inst.cost_of[(9, 4)] == 10
    assert inst.cost_of[(10, 5)] == inst.cost_of[(10, 6)] == 20
    listed = [(8, 10, 7, 4, 1, 2), (11, 10, 7, 9, 2), (11, 9, 2), (8, 6), (11, 10, 7, 6), (8, 10, 6)]
    for nodes in listed:
        for e in zip(nodes, nodes[1:]):
            assert e in inst.edge_index
    assert len(inst.edges) == 15 and 3 not in inst.nodes


def test_unknown_builtin():
    with pytest.raises(UnknownTopology):
        builtin("nsfnet")


def test_load_instance_from_file(tmp_path):
    path = tmp_path / "b.json"
    path.write_text(serialize_instance(builtin("butterfly")))
    assert instance_to_dict(load_instance(str(path))) == instance_to_dict(builtin("butterfly"))


def sprint_config(**kw):
    base = dict(terminals=2, terminal_pool=(1, 2, 4, 5, 6, 9), q=1.5, realizations=50, seed=7)
    base.update(kw)
    return DemandGenConfig(**base)


def test_q_extremes():
    inst = builtin("sprint-core")
    for real in random_demands(inst, sprint_config(q=2.0)):
        assert len(real) == 2 and all(ds == {1, 2} for ds in real.values())
    for real in random_demands(inst, sprint_config(q=1.0)):
        assert all(len(ds) == 1 for ds in real.values())


def test_mean_demand_count_tracks_q():
    inst = builtin("sprint-core")
    reals = random_demands(inst, sprint_config(q=1.5, realizations=10_000, seed=2024))
    sizes = [len(ds) for real in reals for ds in real.values()]
    assert abs(sum(sizes) / len(sizes) - 1.5) <= 0.02


def test_random_demands_deterministic():
    inst = builtin("sprint-core")
    assert random_demands(inst, sprint_config()) == random_demands(inst, sprint_config())
    assert random_demands(inst, sprint_config()) != random_demands(inst, sprint_config(seed=8))


@pytest.mark.parametrize(
    "kw",
    [dict(q=2.5), dict(q=0.9), dict(terminals=7), dict(terminal_pool=(1,)), dict(terminal_pool=(8, 2))],
)
def test_bad_configs(kw):
    with pytest.raises(BadConfig):
        random_demands(builtin("sprint-core"), sprint_config(**kw))


def test_needs_two_flows():
    one_flow = parse_instance(
        json.dumps({"nodes": [1, 2], "edges": [{"from": 1, "to": 2}], "sources": {"1": 1}, "terminals": [{"node": 2, "demands": [1]}]})
    )
    with pytest.raises(BadConfig):
        random_demands(one_flow, DemandGenConfig(terminals=1, terminal_pool=(2,)))


def test_solution_documents():
    fig3 = builtin("fig3")
    doc = json.loads(write_solution(fig3, solve_centralized(fig3).solution))
    assert doc["feasible"] and doc["cost"] == 11
    assert {"flow": 1, "terminal": 8, "nodes": [1, 3, 8]} in doc["paths"]

    empty = json.loads(write_solution(fig3, None))
    assert empty["feasible"] is False and empty["paths"] == []

    bfly = builtin("butterfly")
    out = solve_with_expansion(bfly)
    doc = json.loads(write_solution(bfly, out.solution, expansion=out.expansion))
    assert {"edge": [3, 4], "flows": [1, 2]} in doc["x"]
    assert sorted(doc["expansion"], key=lambda d: d["node"]) == [
        {"node": 7, "demands": [1, 2]},
        {"node": 8, "demands": [1, 2]},
    ]
