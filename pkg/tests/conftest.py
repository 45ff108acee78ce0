"""Shared fixtures: hand-written designs, random valid graph builder, and a
small corpus cache used by the slower suites.
"""

from __future__ import annotations

import random

import numpy as np
import pytest

from structrtl.cdfg import Cdfg, NodeType
from structrtl.data import generate_design
from structrtl.elaborate import compile_verilog

# Exercises every one of the 32 node types at least once: corpus-level class
# counts computed over a fixture containing this module have no zeros, which
# keeps the class-balance weights at a sane scale.
KITCHEN_SINK = """
module kitchen_sink (
  input clk,
  input s,
  input [3:0] a,
  input [3:0] b,
  output [3:0] y0,
  output y1
);
  wire [3:0] w_add, w_sub, w_mul, w_div, w_mod;
  wire [3:0] w_and, w_or, w_xor, w_xnor, w_not;
  wire [3:0] w_shl, w_shr, w_mux;
  wire w_lnot, w_urxor, w_urand, w_uror;
  wire w_lt, w_le, w_gt, w_ge, w_eq, w_neq, w_land, w_lor;
  wire [7:0] w_cat;
  wire [1:0] w_ps;
  reg [3:0] r0;
  assign w_add = a + b;
  assign w_sub = a - b;
  assign w_mul = a * b;
  assign w_div = a / 4'd3;
  assign w_mod = a % 4'd3;
  assign w_and = a & b;
  assign w_or  = a | b;
  assign w_xor = a ^ b;
  assign w_xnor = a ~^ b;
  assign w_not = ~a;
  assign w_shl = a << 1;
  assign w_shr = b >> 2;
  assign w_mux = s ? w_add : w_sub;
  assign w_lnot = !s;
  assign w_urxor = ^a;
  assign w_urand = &b;
  assign w_uror = |a;
  assign w_lt = a < b;
  assign w_le = a <= b;
  assign w_gt = a > b;
  assign w_ge = a >= b;
  assign w_eq = a == b;
  assign w_neq = a != b;
  assign w_land = s && w_lnot;
  assign w_lor = s || w_uror;
  assign w_cat = {w_and, w_or};
  assign w_ps = w_cat[5:4];
  always @(posedge clk) r0 <= w_mux ^ {w_ps, w_land, w_lor};
  assign y0 = r0;
  assign y1 = w_eq & w_lt;
endmodule
"""


@pytest.fixture(scope="session")
def kitchen_sink_graph() -> Cdfg:
    return compile_verilog(KITCHEN_SINK)


def random_valid_graph(rng: np.random.Generator, max_nodes: int = 12) -> Cdfg:
    """Random graph satisfying every CDFG invariant: forward DAG edges plus
    optional backward edges terminating at Reg nodes."""
    n = int(rng.integers(1, max_nodes + 1))
    g = Cdfg()
    types = list(NodeType)
    for i in range(n):
        t = types[int(rng.integers(len(types)))]
        width = int(rng.integers(1, 9))
        attrs = {"value": int(rng.integers(0, 100))} if t == NodeType.Const else {}
        g.add_node(t, width, **attrs)

    def edge_ok(src: int, dst: int) -> bool:
        if g.nodes[dst].node_type in (NodeType.Input, NodeType.Const):
            return False
        if g.nodes[src].node_type == NodeType.Output:
            return False
        return True

    op_count: dict[int, int] = {}
    for dst in range(n):
        for src in range(dst):  # forward edges keep the cut graph acyclic
            if rng.random() < 0.25 and edge_ok(src, dst):
                idx = op_count.get(dst, 0)
                g.add_edge(src, dst, idx)
                op_count[dst] = idx + 1
    for src in range(n):  # backward edges must land on a Reg
        for dst in range(src + 1):
            if g.nodes[dst].node_type == NodeType.Reg and rng.random() < 0.08 and edge_ok(src, dst):
                idx = op_count.get(dst, 0)
                g.add_edge(src, dst, idx)
                op_count[dst] = idx + 1
    return g


def brute_force_longest_path(g: Cdfg) -> int:
    """All-paths enumeration on the Reg-cut graph; the oracle for the DP."""
    keep = {node.id for node in g.nodes if node.node_type != NodeType.Reg}
    adj: dict[int, list[int]] = {i: [] for i in keep}
    for e in g.edges:
        if e.src in keep and e.dst in keep:
            adj[e.src].append(e.dst)

    best = 0

    def walk(node: int, length: int) -> None:
        nonlocal best
        best = max(best, length)
        for nxt in adj[node]:
            walk(nxt, length + 1)

    for start in keep:
        walk(start, 0)
    return best


def permute_graph(g: Cdfg, perm: np.ndarray) -> Cdfg:
    """Relabel node ids: new id i holds the node whose old id is perm[i]."""
    h = Cdfg()
    inv = np.empty_like(perm)
    inv[perm] = np.arange(g.num_nodes)
    for new_id in range(g.num_nodes):
        old = g.nodes[int(perm[new_id])]
        h.add_node(old.node_type, old.width, **old.attrs)
    for e in g.edges:
        h.add_edge(int(inv[e.src]), int(inv[e.dst]), e.op_idx)
    return h


def assert_pe_permutation_equivariant(g: Cdfg, tol: float = 1e-7, seed: int = 0) -> None:
    """Positional embeddings must follow a node relabeling: column-wise up to
    sign for simple eigenvalues, and as an equal subspace for degenerate
    blocks (no canonical basis exists inside a block). A block straddling the
    k=16 truncation boundary is skipped: the truncated slice of a degenerate
    eigenspace is not a permutation-invariant object."""
    from structrtl.spectral import eigendecompose, normalized_laplacian, positional_embeddings

    rng = np.random.default_rng(seed)
    perm = rng.permutation(g.num_nodes)
    h = permute_graph(g, perm)
    pe_g = positional_embeddings(g)
    pe_h = positional_embeddings(h)
    k = min(g.num_nodes, 16)
    assert np.allclose(pe_g.eigenvalues, pe_h.eigenvalues, atol=1e-9)
    assert np.all(pe_g.vectors[:, g.num_nodes :] == 0.0)
    assert np.all(pe_h.vectors[:, g.num_nodes :] == 0.0)

    all_vals, _ = eigendecompose(normalized_laplacian(g))
    permuted = pe_g.vectors[perm]
    start = 0
    while start < k:
        stop = start + 1
        while stop < g.num_nodes and all_vals[stop] - all_vals[stop - 1] <= 1e-8:
            stop += 1
        if stop > k:
            break  # degenerate block truncated by k; not comparable
        u = permuted[:, start:stop]
        v = pe_h.vectors[:, start:stop]
        if stop - start == 1:
            a, b = u[:, 0], v[:, 0]
            assert min(np.linalg.norm(a - b), np.linalg.norm(a + b)) <= tol
        else:
            assert np.linalg.norm(u @ u.T - v @ v.T) <= tol
        start = stop


@pytest.fixture(scope="session")
def tiny_design_texts() -> list[str]:
    """The 8-design overfit fixture: the kitchen sink plus 7 generated modules."""
    texts = [KITCHEN_SINK]
    for i in range(7):
        texts.append(generate_design(random.Random(f"fixture:{i}"), "tiny", f"fx{i}"))
    return texts
