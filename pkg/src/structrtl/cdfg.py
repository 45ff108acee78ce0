"""Control-data-flow graph data model.

Nodes are typed, width-annotated operations/storage elements; directed edges
carry an operand index so non-commutative operators keep their argument order.
Graphs may be cyclic, but only through Reg nodes (register feedback).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Iterable, NamedTuple

import numpy as np


class NodeType(IntEnum):
    """Closed 32-entry node vocabulary.

    The integer codes are frozen in this order: they define the one-hot
    feature layout and the serialization contract, so never reorder.
    """

    LNot = 0
    Not = 1
    URxor = 2
    URand = 3
    URor = 4
    Lt = 5
    Le = 6
    Gt = 7
    Ge = 8
    Add = 9
    Sub = 10
    Mul = 11
    Div = 12
    Mod = 13
    ShiftLeft = 14
    ShiftRight = 15
    And = 16
    Or = 17
    Eq = 18
    Neq = 19
    BitAnd = 20
    BitOr = 21
    BitXor = 22
    BitNXor = 23
    PartSelect = 24
    Concat = 25
    Cond = 26
    Wire = 27
    Const = 28
    Input = 29
    Output = 30
    Reg = 31


NUM_NODE_TYPES = len(NodeType)
assert NUM_NODE_TYPES == 32

NODE_FEATURE_DIM = NUM_NODE_TYPES + 1  # one-hot type + width feature

_TYPE_BY_NAME = {t.name: t for t in NodeType}


class Edge(NamedTuple):
    src: int
    dst: int
    op_idx: int = 0


@dataclass
class Node:
    id: int
    node_type: NodeType
    width: int
    attrs: dict[str, Any] = field(default_factory=dict)


@dataclass
class Cdfg:
    nodes: list[Node] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def add_node(self, node_type: NodeType, width: int, **attrs: Any) -> int:
        nid = len(self.nodes)
        self.nodes.append(Node(nid, node_type, width, attrs))
        return nid

    def add_edge(self, src: int, dst: int, op_idx: int = 0) -> None:
        self.edges.append(Edge(src, dst, op_idx))

    def edge_index(self) -> np.ndarray:
        """(2, E) int array of [src; dst] rows. Empty edge list gives (2, 0)."""
        if not self.edges:
            return np.zeros((2, 0), dtype=np.int64)
        return np.array([(e.src, e.dst) for e in self.edges], dtype=np.int64).T

    def in_degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for e in self.edges:
            deg[e.dst] += 1
        return deg

    def out_degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for e in self.edges:
            deg[e.src] += 1
        return deg

    def node_type_codes(self) -> np.ndarray:
        return np.array([int(n.node_type) for n in self.nodes], dtype=np.int64)


class SchemaError(ValueError):
    """Malformed CDFG/netlist JSON. `path` is a JSON-pointer-style location."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


def validate(g: Cdfg) -> list[str]:
    """Check every structural invariant; returns all violations (empty = ok)."""
    violations: list[str] = []
    n = g.num_nodes

    for i, node in enumerate(g.nodes):
        if node.id != i:
            violations.append(f"node ids not dense: index {i} has id {node.id}")
        if not isinstance(node.width, int) or isinstance(node.width, bool) or node.width < 1:
            violations.append(f"node {i}: width must be a positive integer, got {node.width!r}")
        if node.node_type == NodeType.Const and "value" not in node.attrs:
            violations.append(f"node {i}: Const node missing 'value' attr")

    seen: set[Edge] = set()
    in_deg = [0] * n
    out_deg = [0] * n
    for e in g.edges:
        if not (0 <= e.src < n and 0 <= e.dst < n):
            violations.append(f"dangling edge ({e.src} -> {e.dst})")
            continue
        if e in seen:
            violations.append(f"duplicate edge ({e.src} -> {e.dst}, op_idx {e.op_idx})")
        seen.add(e)
        if e.src == e.dst and g.nodes[e.dst].node_type != NodeType.Reg:
            violations.append(f"self-loop on non-Reg node {e.src}")
        in_deg[e.dst] += 1
        out_deg[e.src] += 1

    for node in g.nodes:
        if node.id >= n:
            continue
        if node.node_type == NodeType.Output and out_deg[node.id] > 0:
            violations.append(f"Output node {node.id} has outgoing edges")
        if node.node_type in (NodeType.Input, NodeType.Const) and in_deg[node.id] > 0:
            violations.append(f"{node.node_type.name} node {node.id} has incoming edges")

    cyc = _comb_cycle_nodes(g)
    if cyc:
        violations.append(f"combinational cycle through nodes {sorted(cyc)}")

    return violations


def _comb_subgraph(g: Cdfg) -> tuple[list[int], dict[int, list[int]]]:
    """Node ids and adjacency of the graph with Reg nodes (and their edges) removed."""
    keep = [n.id for n in g.nodes if n.node_type != NodeType.Reg]
    keepset = set(keep)
    adj: dict[int, list[int]] = {i: [] for i in keep}
    for e in g.edges:
        if e.src in keepset and e.dst in keepset:
            adj[e.src].append(e.dst)
    return keep, adj


def _comb_cycle_nodes(g: Cdfg) -> set[int]:
    """Nodes on cycles of the Reg-cut graph (empty set when acyclic)."""
    keep, adj = _comb_subgraph(g)
    indeg = {i: 0 for i in keep}
    for i in keep:
        for j in adj[i]:
            indeg[j] += 1
    queue = [i for i in keep if indeg[i] == 0]
    removed = 0
    while queue:
        i = queue.pop()
        removed += 1
        for j in adj[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(j)
    if removed == len(keep):
        return set()
    return {i for i in keep if indeg[i] > 0}


def longest_combinational_path(g: Cdfg) -> int:
    """Longest directed path, counted in edges, after deleting all Reg nodes.

    Returns 0 when no edge survives the cut. Requires a valid graph (the cut
    graph must be acyclic).
    """
    keep, adj = _comb_subgraph(g)
    indeg = {i: 0 for i in keep}
    for i in keep:
        for j in adj[i]:
            indeg[j] += 1
    order: list[int] = []
    queue = [i for i in keep if indeg[i] == 0]
    while queue:
        i = queue.pop()
        order.append(i)
        for j in adj[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(j)
    if len(order) != len(keep):
        raise ValueError("combinational cycle: longest path undefined")
    dist = {i: 0 for i in keep}
    for i in order:
        for j in adj[i]:
            if dist[i] + 1 > dist[j]:
                dist[j] = dist[i] + 1
    return max(dist.values(), default=0)


def init_node_features(g: Cdfg) -> np.ndarray:
    """Initial embedding matrix, one row per node: one-hot type + log2(1+width).

    The log keeps the width feature O(10) even for kilobit buses.
    """
    feats = np.zeros((g.num_nodes, NODE_FEATURE_DIM), dtype=np.float64)
    for node in g.nodes:
        feats[node.id, int(node.node_type)] = 1.0
        feats[node.id, NUM_NODE_TYPES] = math.log2(1.0 + node.width)
    return feats


@dataclass
class BaselineFeatures:
    """Hand-crafted per-graph statistics used by the shallow regression baseline."""

    total_bits_per_type: np.ndarray  # (32,) int64
    count_per_type: np.ndarray  # (32,) int64
    avg_wire_width: float
    longest_comb_path_len: int

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.total_bits_per_type.astype(np.float64),
                self.count_per_type.astype(np.float64),
                [self.avg_wire_width, float(self.longest_comb_path_len)],
            ]
        )


def baseline_features(g: Cdfg) -> BaselineFeatures:
    total_bits = np.zeros(NUM_NODE_TYPES, dtype=np.int64)
    counts = np.zeros(NUM_NODE_TYPES, dtype=np.int64)
    wire_widths = []
    for node in g.nodes:
        code = int(node.node_type)
        total_bits[code] += node.width
        counts[code] += 1
        if node.node_type == NodeType.Wire:
            wire_widths.append(node.width)
    avg_wire = float(np.mean(wire_widths)) if wire_widths else 0.0
    return BaselineFeatures(total_bits, counts, avg_wire, longest_combinational_path(g))


def node_type_histogram(corpus: Iterable[Cdfg]) -> tuple[np.ndarray, np.ndarray]:
    """Per-type counts and percentage shares over a corpus of graphs."""
    counts = np.zeros(NUM_NODE_TYPES, dtype=np.int64)
    for g in corpus:
        for node in g.nodes:
            counts[int(node.node_type)] += 1
    total = int(counts.sum())
    if total == 0:
        return counts, np.zeros(NUM_NODE_TYPES, dtype=np.float64)
    return counts, 100.0 * counts / total


def format_histogram(counts: np.ndarray, ratios: np.ndarray) -> str:
    lines = [f"{'type':<12}{'count':>12}{'ratio':>9}"]
    for t in NodeType:
        lines.append(f"{t.name:<12}{int(counts[t]):>12}{ratios[t]:>8.2f}%")
    lines.append(f"{'total':<12}{int(counts.sum()):>12}{ratios.sum():>8.2f}%")
    return "\n".join(lines)


_ALLOWED_NODE_KEYS = {"id", "type", "width", "attrs"}
_ALLOWED_EDGE_KEYS = {"src", "dst", "op_idx"}


def to_json(g: Cdfg) -> str:
    """Canonical JSON text; byte-stable for identical graphs."""
    obj = {
        "nodes": [
            {
                "id": n.id,
                "type": n.node_type.name,
                "width": n.width,
                "attrs": {k: n.attrs[k] for k in sorted(n.attrs)},
            }
            for n in g.nodes
        ],
        "edges": [{"src": e.src, "dst": e.dst, "op_idx": e.op_idx} for e in g.edges],
    }
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _expect_int(value: Any, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError(path, f"expected integer, got {value!r}")
    return value


def from_json(data: str | bytes) -> Cdfg:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError("/", f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("/", "expected a JSON object")
    for key in obj:
        if key not in ("nodes", "edges"):
            raise SchemaError(f"/{key}", "unknown top-level key")
    nodes_obj = obj.get("nodes", [])
    edges_obj = obj.get("edges", [])
    if not isinstance(nodes_obj, list):
        raise SchemaError("/nodes", "expected a list")
    if not isinstance(edges_obj, list):
        raise SchemaError("/edges", "expected a list")

    g = Cdfg()
    for i, nd in enumerate(nodes_obj):
        path = f"/nodes/{i}"
        if not isinstance(nd, dict):
            raise SchemaError(path, "expected an object")
        for key in nd:
            if key not in _ALLOWED_NODE_KEYS:
                raise SchemaError(f"{path}/{key}", "unknown key")
        nid = _expect_int(nd.get("id"), f"{path}/id")
        if nid != i:
            raise SchemaError(f"{path}/id", f"ids must be dense and ordered; expected {i}, got {nid}")
        tname = nd.get("type")
        if tname not in _TYPE_BY_NAME:
            raise SchemaError(f"{path}/type", f"unknown node type {tname!r}")
        width = _expect_int(nd.get("width"), f"{path}/width")
        attrs = nd.get("attrs", {})
        if not isinstance(attrs, dict):
            raise SchemaError(f"{path}/attrs", "expected an object")
        for k, v in attrs.items():
            if not isinstance(k, str) or not isinstance(v, (str, int)) or isinstance(v, bool):
                raise SchemaError(f"{path}/attrs/{k}", "attr values must be strings or integers")
        g.nodes.append(Node(nid, _TYPE_BY_NAME[tname], width, dict(attrs)))

    for i, ed in enumerate(edges_obj):
        path = f"/edges/{i}"
        if not isinstance(ed, dict):
            raise SchemaError(path, "expected an object")
        for key in ed:
            if key not in _ALLOWED_EDGE_KEYS:
                raise SchemaError(f"{path}/{key}", "unknown key")
        src = _expect_int(ed.get("src"), f"{path}/src")
        dst = _expect_int(ed.get("dst"), f"{path}/dst")
        op_idx = _expect_int(ed.get("op_idx", 0), f"{path}/op_idx")
        g.edges.append(Edge(src, dst, op_idx))

    return g


def to_dot(g: Cdfg) -> str:
    """Graphviz text for visual inspection."""
    lines = ["digraph cdfg {", "  rankdir=LR;", "  node [shape=box, fontsize=10];"]
    for n in g.nodes:
        label = n.node_type.name
        if "name" in n.attrs:
            label += f"\\n{n.attrs['name']}"
        if n.node_type == NodeType.Const:
            label += f"\\n={n.attrs.get('value', '?')}"
        label += f"\\nw={n.width}"
        lines.append(f'  n{n.id} [label="{label}"];')
    for e in g.edges:
        lines.append(f'  n{e.src} -> n{e.dst} [label="{e.op_idx}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
