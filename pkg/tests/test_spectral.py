import numpy as np
import pytest

from structrtl.cdfg import Cdfg, NodeType
from structrtl.spectral import (
    PositionalEmbeddings,
    eigendecompose,
    normalized_laplacian,
    positional_embeddings,
    sign_flip_augment,
)

from conftest import assert_pe_permutation_equivariant, random_valid_graph


def graph_from_edges(n, edges):
    g = Cdfg()
    for _ in range(n):
        g.add_node(NodeType.Wire, 1)
    for i, (s, d) in enumerate(edges):
        g.add_edge(s, d, i)
    return g


def test_two_node_path_laplacian():
    g = graph_from_edges(2, [(0, 1)])
    lap = normalized_laplacian(g)
    assert np.allclose(lap, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)


def test_triangle_eigenvalues():
    g = graph_from_edges(3, [(0, 1), (1, 2), (2, 0)])
    vals, _ = eigendecompose(normalized_laplacian(g))
    assert np.allclose(vals, [0.0, 1.5, 1.5], atol=1e-9)


def test_isolated_node_gets_diagonal_one():
    g = graph_from_edges(1, [])
    assert np.array_equal(normalized_laplacian(g), [[1.0]])


def test_directed_edges_are_symmetrized_and_binarized():
    g = graph_from_edges(2, [(0, 1), (1, 0)])  # reciprocal pair counts once
    lap = normalized_laplacian(g)
    assert np.allclose(lap, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)


def test_self_loops_dropped():
    g = Cdfg()
    g.add_node(NodeType.Reg, 1)
    g.add_node(NodeType.Wire, 1)
    g.add_edge(0, 0)
    g.add_edge(0, 1)
    lap = normalized_laplacian(g)
    assert lap[0, 0] == 1.0


def test_identity_matrix_eigendecomposition():
    vals, vecs = eigendecompose(np.eye(3))
    assert np.allclose(vals, [1.0, 1.0, 1.0])
    assert np.allclose(vecs @ vecs.T, np.eye(3), atol=1e-12)


def test_two_by_two_known_spectrum():
    vals, vecs = eigendecompose(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    assert np.allclose(vals, [0.0, 2.0], atol=1e-12)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    assert np.allclose(vecs[:, 0], [inv_sqrt2, inv_sqrt2], atol=1e-12)
    assert np.allclose(vecs[:, 1], [inv_sqrt2, -inv_sqrt2], atol=1e-12)


def test_random_symmetric_residuals():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(8, 8))
    sym = (a + a.T) / 2
    vals, vecs = eigendecompose(sym)
    for i in range(8):
        residual = np.linalg.norm(sym @ vecs[:, i] - vals[i] * vecs[:, i])
        assert residual <= 1e-8
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.allclose(vecs.T @ vecs, np.eye(8), atol=1e-8)


def test_eigendecompose_rejects_asymmetric():
    with pytest.raises(ValueError):
        eigendecompose(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_padding_below_16_nodes():
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    pe = positional_embeddings(g)
    assert pe.vectors.shape == (3, 16)
    assert np.all(pe.vectors[:, 3:] == 0.0)
    assert pe.eigenvalues.shape == (3,)


def test_single_node_embedding():
    g = graph_from_edges(1, [])
    pe = positional_embeddings(g)
    assert np.allclose(pe.vectors[:, 0], [1.0])
    assert np.all(pe.vectors[:, 1:] == 0.0)


def test_twenty_node_graph_residuals():
    rng = np.random.default_rng(1)
    g = random_valid_graph(rng, max_nodes=20)
    while g.num_nodes < 17 or g.num_edges == 0:
        g = random_valid_graph(rng, max_nodes=20)
    lap = normalized_laplacian(g)
    pe = positional_embeddings(g)
    assert pe.vectors.shape == (g.num_nodes, 16)
    for j in range(16):
        residual = np.linalg.norm(lap @ pe.vectors[:, j] - pe.eigenvalues[j] * pe.vectors[:, j])
        assert residual <= 1e-8


def test_eigenvalue_range_and_zero_mode():
    rng = np.random.default_rng(2)
    for _ in range(25):
        g = random_valid_graph(rng)
        if g.num_edges == 0:
            continue
        lap = normalized_laplacian(g)
        vals, vecs = eigendecompose(lap)
        assert vals.min() >= -1e-8
        assert vals.max() <= 2.0 + 1e-8
        # smallest eigenvalue 0 with eigenvector proportional to D^{1/2} 1
        # on each connected component
        assert abs(vals[0]) <= 1e-8
        deg = _degrees(g)
        comp = _component_of(g)
        for c in set(comp):
            idx = [i for i in range(g.num_nodes) if comp[i] == c and deg[i] > 0]
            if not idx:
                continue
            target = np.sqrt(deg[idx])
            target /= np.linalg.norm(target)
            # the kernel of L restricted to this component is spanned by D^(1/2)1
            k = sum(1 for v in vals if abs(v) <= 1e-8)
            basis = vecs[idx][:, :k]
            proj = basis @ (basis.T @ target)
            assert np.linalg.norm(proj - target) <= 1e-6


def _degrees(g):
    deg = np.zeros(g.num_nodes)
    seen = set()
    for e in g.edges:
        if e.src == e.dst:
            continue
        key = (min(e.src, e.dst), max(e.src, e.dst))
        if key in seen:
            continue
        seen.add(key)
        deg[e.src] += 1
        deg[e.dst] += 1
    return deg


def _component_of(g):
    parent = list(range(g.num_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in g.edges:
        a, b = find(e.src), find(e.dst)
        if a != b:
            parent[a] = b
    return [find(i) for i in range(g.num_nodes)]


def test_permutation_equivariance_up_to_sign():
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 10:
        g = random_valid_graph(rng, max_nodes=10)
        if g.num_edges == 0:
            continue
        assert_pe_permutation_equivariant(g, seed=checked)
        checked += 1


class _AlwaysFlip:
    def random(self):
        return 0.0


class _NeverFlip:
    def random(self):
        return 1.0


def test_sign_flip_reproducible_under_seed():
    pe = PositionalEmbeddings(np.random.default_rng(0).normal(size=(5, 16)), np.zeros(5))
    out1 = sign_flip_augment(pe, np.random.default_rng(42))
    out2 = sign_flip_augment(pe, np.random.default_rng(42))
    assert np.array_equal(out1.vectors, out2.vectors)


def test_sign_flip_all_flips_negates_nonzero_columns():
    vecs = np.random.default_rng(0).normal(size=(4, 16))
    vecs[:, 10:] = 0.0
    pe = PositionalEmbeddings(vecs.copy(), np.zeros(4))
    flipped = sign_flip_augment(pe, _AlwaysFlip())
    assert np.array_equal(flipped.vectors[:, :10], -vecs[:, :10])
    assert np.all(flipped.vectors[:, 10:] == 0.0)
    same = sign_flip_augment(pe, _NeverFlip())
    assert np.array_equal(same.vectors, vecs)


def test_sign_flip_preserves_column_norms():
    g = graph_from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
    pe = positional_embeddings(g)
    flipped = sign_flip_augment(pe, np.random.default_rng(7))
    assert np.allclose(
        np.linalg.norm(flipped.vectors, axis=0), np.linalg.norm(pe.vectors, axis=0), atol=1e-12
    )
