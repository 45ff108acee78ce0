import math

import numpy as np
import pytest

from structrtl.cdfg import (
    Cdfg,
    Edge,
    Node,
    NodeType,
    SchemaError,
    baseline_features,
    from_json,
    init_node_features,
    longest_combinational_path,
    node_type_histogram,
    to_dot,
    to_json,
    validate,
)

from conftest import brute_force_longest_path, random_valid_graph

EXPECTED_CODE_ORDER = [
    "LNot", "Not", "URxor", "URand", "URor", "Lt", "Le", "Gt", "Ge", "Add",
    "Sub", "Mul", "Div", "Mod", "ShiftLeft", "ShiftRight", "And", "Or", "Eq",
    "Neq", "BitAnd", "BitOr", "BitXor", "BitNXor", "PartSelect", "Concat",
    "Cond", "Wire", "Const", "Input", "Output", "Reg",
]


def test_node_type_codes_are_frozen():
    assert len(NodeType) == 32
    assert [t.name for t in sorted(NodeType, key=int)] == EXPECTED_CODE_ORDER
    assert [int(t) for t in sorted(NodeType, key=int)] == list(range(32))


def chain(*types, widths=None):
    g = Cdfg()
    for i, t in enumerate(types):
        w = widths[i] if widths else 1
        attrs = {"value": 0} if t == NodeType.Const else {}
        g.add_node(t, w, **attrs)
    for i in range(len(types) - 1):
        g.add_edge(i, i + 1)
    return g


def test_validate_empty_graph_ok():
    assert validate(Cdfg()) == []


def test_validate_dangling_edge():
    g = chain(NodeType.Input, NodeType.Output)
    g.add_edge(0, 7)
    assert any("dangling edge" in v for v in validate(g))


def test_validate_two_wire_cycle_is_combinational():
    g = Cdfg()
    g.add_node(NodeType.Wire, 1)
    g.add_node(NodeType.Wire, 1)
    g.add_edge(0, 1)
    g.add_edge(1, 0)
    assert any("combinational cycle" in v for v in validate(g))


def test_validate_reg_feedback_cycle_ok():
    g = Cdfg()
    g.add_node(NodeType.Reg, 1)
    g.add_node(NodeType.Add, 1)
    g.add_edge(0, 1)
    g.add_edge(1, 0)
    assert validate(g) == []


def test_validate_self_loop_rules():
    g = Cdfg()
    g.add_node(NodeType.Reg, 1)
    g.add_edge(0, 0)
    assert validate(g) == []
    h = Cdfg()
    h.add_node(NodeType.Wire, 1)
    h.add_edge(0, 0)
    assert any("self-loop" in v for v in validate(h))


def test_validate_io_degree_rules():
    g = Cdfg()
    g.add_node(NodeType.Output, 1)
    g.add_node(NodeType.Wire, 1)
    g.add_edge(0, 1)
    assert any("Output node 0 has outgoing edges" in v for v in validate(g))
    h = Cdfg()
    h.add_node(NodeType.Wire, 1)
    h.add_node(NodeType.Input, 1)
    h.add_edge(0, 1)
    assert any("Input node 1 has incoming edges" in v for v in validate(h))


def test_validate_collects_all_violations():
    g = Cdfg()
    g.nodes.append(Node(0, NodeType.Const, 0, {}))  # bad width AND missing value
    g.add_edge(0, 3)
    problems = validate(g)
    assert len(problems) >= 3


def test_validate_duplicate_edge():
    g = chain(NodeType.Input, NodeType.Not)
    g.add_edge(0, 1, 0)
    assert any("duplicate edge" in v for v in validate(g))


def test_init_node_features_one_hot_and_width():
    g = Cdfg()
    g.add_node(NodeType.Wire, 1)
    g.add_node(NodeType.Add, 8)
    feats = init_node_features(g)
    assert feats.shape == (2, 33)
    assert feats[0, int(NodeType.Wire)] == 1.0
    assert feats[0, 32] == 1.0  # log2(1 + 1)
    assert feats[1, int(NodeType.Add)] == 1.0
    assert feats[1, 32] == pytest.approx(math.log2(9.0), abs=1e-12)
    assert np.all(feats[:, :32].sum(axis=1) == 1.0)


def test_longest_path_simple_chain():
    g = chain(NodeType.Input, NodeType.Not, NodeType.Output)
    assert longest_combinational_path(g) == 2
    assert brute_force_longest_path(g) == 2


def test_longest_path_cut_at_reg():
    g = chain(NodeType.Input, NodeType.Add, NodeType.Reg, NodeType.Output)
    assert longest_combinational_path(g) == 1  # Input -> Add survives the cut
    assert brute_force_longest_path(g) == 1


def test_longest_path_single_const_is_zero():
    g = Cdfg()
    g.add_node(NodeType.Const, 1, value=0)
    assert longest_combinational_path(g) == 0


def test_longest_path_matches_brute_force_on_random_graphs():
    rng = np.random.default_rng(11)
    for _ in range(60):
        g = random_valid_graph(rng)
        assert validate(g) == []
        assert longest_combinational_path(g) == brute_force_longest_path(g)


def test_baseline_features_single_input():
    g = Cdfg()
    g.add_node(NodeType.Input, 8)
    f = baseline_features(g)
    assert f.total_bits_per_type[int(NodeType.Input)] == 8
    assert f.count_per_type[int(NodeType.Input)] == 1
    assert f.avg_wire_width == 0.0


def test_baseline_features_wire_mean():
    g = Cdfg()
    g.add_node(NodeType.Wire, 2)
    g.add_node(NodeType.Wire, 4)
    assert baseline_features(g).avg_wire_width == 3.0


def test_baseline_features_hand_tally_on_chain():
    g = chain(NodeType.Input, NodeType.Not, NodeType.Output, widths=[4, 4, 4])
    f = baseline_features(g)
    assert f.count_per_type.sum() == 3
    assert f.total_bits_per_type.sum() == 12
    assert f.longest_comb_path_len == 2
    assert f.as_vector().shape == (66,)


def test_json_round_trip_fixture():
    g = chain(NodeType.Input, NodeType.Not, NodeType.Output)
    g.nodes[0].attrs["name"] = "a"
    text = to_json(g)
    assert from_json(text) == g
    assert to_json(from_json(text)) == text


def test_json_round_trip_random_graphs():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        g = random_valid_graph(rng, max_nodes=10)
        assert from_json(to_json(g)) == g


def test_from_json_unknown_type():
    with pytest.raises(SchemaError) as err:
        from_json('{"nodes": [{"id": 0, "type": "Nand", "width": 1}], "edges": []}')
    assert err.value.path == "/nodes/0/type"


def test_from_json_op_idx_defaults_to_zero():
    g = from_json(
        '{"nodes": [{"id": 0, "type": "Input", "width": 1},'
        ' {"id": 1, "type": "Not", "width": 1}],'
        ' "edges": [{"src": 0, "dst": 1}]}'
    )
    assert g.edges == [Edge(0, 1, 0)]


@pytest.mark.parametrize(
    "payload,path",
    [
        ('{"nodes": 3, "edges": []}', "/nodes"),
        ('{"nodes": [], "edges": [], "extra": 1}', "/extra"),
        ('{"nodes": [{"id": 1, "type": "Wire", "width": 1}], "edges": []}', "/nodes/0/id"),
        ('{"nodes": [{"id": 0, "type": "Wire", "width": "x"}], "edges": []}', "/nodes/0/width"),
        ('{"nodes": [{"id": 0, "type": "Wire", "width": 1, "foo": 1}], "edges": []}', "/nodes/0/foo"),
        ('{"nodes": [], "edges": [{"src": 0}]}', "/edges/0/dst"),
        ("not json", "/"),
    ],
)
def test_schema_errors_carry_json_pointers(payload, path):
    with pytest.raises(SchemaError) as err:
        from_json(payload)
    assert err.value.path == path


def test_histogram_three_types():
    g = chain(NodeType.Input, NodeType.Not, NodeType.Output)
    counts, ratios = node_type_histogram([g])
    for t in (NodeType.Input, NodeType.Not, NodeType.Output):
        assert counts[int(t)] == 1
        assert ratios[int(t)] == pytest.approx(100.0 / 3.0, abs=1e-9)


def test_histogram_empty_corpus():
    counts, ratios = node_type_histogram([])
    assert counts.sum() == 0
    assert np.all(ratios == 0.0)


def test_histogram_ratios_sum_to_100_on_corpus():
    rng = np.random.default_rng(5)
    graphs = [random_valid_graph(rng) for _ in range(100)]
    _, ratios = node_type_histogram(graphs)
    assert ratios.sum() == pytest.approx(100.0, abs=0.01)


# Published per-type corpus statistics for the 32-type vocabulary; the shares
# printed by the histogram must reproduce from the raw counts.
REFERENCE_COUNTS = {
    NodeType.LNot: 33521, NodeType.Not: 24579, NodeType.URxor: 119,
    NodeType.URand: 739, NodeType.URor: 5285, NodeType.Lt: 2852,
    NodeType.Le: 2285, NodeType.Gt: 1701, NodeType.Ge: 3139,
    NodeType.Add: 30179, NodeType.Sub: 6177, NodeType.Mul: 3325,
    NodeType.Div: 198, NodeType.Mod: 142, NodeType.ShiftLeft: 261,
    NodeType.ShiftRight: 487, NodeType.And: 29679, NodeType.Or: 8303,
    NodeType.Eq: 189418, NodeType.Neq: 1350, NodeType.BitAnd: 51656,
    NodeType.BitOr: 23330, NodeType.BitXor: 101147, NodeType.BitNXor: 67,
    NodeType.PartSelect: 124144, NodeType.Concat: 52727, NodeType.Cond: 571656,
    NodeType.Wire: 1139415, NodeType.Const: 232450, NodeType.Input: 73853,
    NodeType.Output: 64047, NodeType.Reg: 66680,
}


def test_reference_count_table_reproduces_wire_share():
    total = sum(REFERENCE_COUNTS.values())
    wire_share = 100.0 * REFERENCE_COUNTS[NodeType.Wire] / total
    assert round(wire_share, 2) == 40.05
    # spot-check a few more published shares
    assert round(100.0 * REFERENCE_COUNTS[NodeType.Cond] / total, 2) == 20.09
    assert round(100.0 * REFERENCE_COUNTS[NodeType.Const] / total, 2) == 8.17


def test_to_dot_mentions_every_node():
    g = chain(NodeType.Input, NodeType.Not, NodeType.Output)
    dot = to_dot(g)
    assert dot.count(" -> ") == 2
    assert "Not" in dot
