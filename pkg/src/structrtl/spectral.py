"""Spectral positional embeddings from the graph Laplacian.

The adjacency is symmetrized and binarized before normalizing, so the
Laplacian is literally symmetric and its spectrum real in [0, 2]. Embeddings
take the eigenvectors of the 16 smallest eigenvalues, zero-padded when the
graph has fewer than 16 nodes; eigenvector signs are randomized during
training because both signs are equally valid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cdfg import Cdfg

PE_DIM = 16


class ConvergenceError(RuntimeError):
    pass


@dataclass
class PositionalEmbeddings:
    vectors: np.ndarray  # (N, 16); column j is the eigenvector of the j-th smallest eigenvalue
    eigenvalues: np.ndarray  # (min(N, 16),)


def normalized_laplacian(g: Cdfg) -> np.ndarray:
    """Symmetric normalized Laplacian of the symmetrized, binarized adjacency.

    Self-loops are dropped before normalizing; zero-degree entries use the
    0^{-1/2} := 0 convention, so isolated nodes get a diagonal 1.
    """
    n = g.num_nodes
    adj = np.zeros((n, n), dtype=np.float64)
    for e in g.edges:
        if e.src != e.dst:
            adj[e.src, e.dst] = 1.0
            adj[e.dst, e.src] = 1.0
    deg = adj.sum(axis=1)
    inv_sqrt = np.zeros(n, dtype=np.float64)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    lap = np.eye(n) - (inv_sqrt[:, None] * adj) * inv_sqrt[None, :]
    return (lap + lap.T) / 2.0


def eigendecompose(lap: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full symmetric eigendecomposition: ascending eigenvalues, orthonormal columns.

    Ties are broken deterministically: each eigenvector is sign-normalized so
    its first entry of nonneglible magnitude is positive, and equal-eigenvalue
    blocks are ordered lexicographically.
    """
    if lap.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    if not np.allclose(lap, lap.T, atol=1e-12):
        raise ValueError("matrix must be symmetric")
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition failed to converge: {exc}") from exc
    eigenvectors = _sign_normalize(eigenvectors)
    order = _tie_broken_order(eigenvalues, eigenvectors)
    return eigenvalues[order], eigenvectors[:, order]


def _sign_normalize(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-9)
        if idx.size and col[idx[0]] < 0:
            out[:, j] = -col
    return out


def _tie_broken_order(vals: np.ndarray, vecs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    order = list(np.argsort(vals, kind="stable"))
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and vals[order[j]] - vals[order[i]] <= tol:
            j += 1
        if j - i > 1:
            block = sorted(order[i:j], key=lambda k: tuple(np.round(vecs[:, k], 9)))
            order[i:j] = block
        i = j
    return np.array(order, dtype=np.int64)


def positional_embeddings(g: Cdfg, k: int = PE_DIM) -> PositionalEmbeddings:
    """Eigenvectors of the k smallest Laplacian eigenvalues, zero-padded past N."""
    n = g.num_nodes
    vals, vecs = eigendecompose(normalized_laplacian(g))
    keep = min(n, k)
    pe = np.zeros((n, k), dtype=np.float64)
    pe[:, :keep] = vecs[:, :keep]
    return PositionalEmbeddings(vectors=pe, eigenvalues=vals[:keep].copy())


def sign_flip_augment(pe: PositionalEmbeddings, rng: np.random.Generator) -> PositionalEmbeddings:
    """Flip each nonzero column's sign with probability 1/2 (training only)."""
    vectors = pe.vectors.copy()
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        if not col.any():
            continue
        if rng.random() < 0.5:
            vectors[:, j] = -col
    return PositionalEmbeddings(vectors=vectors, eigenvalues=pe.eigenvalues.copy())


def pe_to_json(pe: PositionalEmbeddings) -> str:
    import json

    obj = {
        "eigenvalues": [float(v) for v in pe.eigenvalues],
        "k": int(pe.vectors.shape[1]),
        "num_nodes": int(pe.vectors.shape[0]),
        "vectors": [float(v) for v in pe.vectors.reshape(-1)],  # row-major
    }
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def pe_from_json(data: str | bytes) -> PositionalEmbeddings:
    import json

    obj = json.loads(data)
    n, k = int(obj["num_nodes"]), int(obj["k"])
    vectors = np.array(obj["vectors"], dtype=np.float64).reshape(n, k)
    return PositionalEmbeddings(vectors=vectors, eigenvalues=np.array(obj["eigenvalues"], dtype=np.float64))
