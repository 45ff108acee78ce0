"""Model definitions: the CDFG encoder (GIN stack + Transformer with
positional-embedding projection + task heads) and the netlist-side teacher
(residual GIN stack + regression head).
"""

from __future__ import annotations

import numpy as np

from ..cdfg import NODE_FEATURE_DIM, NUM_NODE_TYPES
from ..spectral import PE_DIM
from .layers import MLP, GinLayer, LayerNorm, Linear, Module, TransformerLayer, mean_max_pool
from .tensor import Tensor, masked_row_replace, param, reshape


class EncoderModel(Module):
    """GIN message passing followed by a Transformer encoder over all nodes.

    Also owns the learnable [MASK] embedding and the three task heads
    (node-type classification, edge prediction, quality regression).
    """

    def __init__(
        self,
        rng: np.random.Generator,
        hidden_dim: int = 128,
        gin_layers: int = 8,
        transformer_layers: int = 8,
        attention_heads: int = 4,
        ff_multiplier: int = 4,
        in_dim: int = NODE_FEATURE_DIM,
        pe_dim: int = PE_DIM,
        num_types: int = NUM_NODE_TYPES,
    ):
        h = hidden_dim
        self.hidden_dim = h
        self.gin = [
            GinLayer(in_dim if i == 0 else h, h, rng) for i in range(gin_layers)
        ]
        self.pe_proj = Linear(pe_dim, h, rng)
        self.mask_embed = param(rng.normal(0.0, 0.02, size=h))
        self.transformer = [
            TransformerLayer(h, attention_heads, ff_multiplier * h, rng)
            for _ in range(transformer_layers)
        ]
        self.final_norm = LayerNorm(h)
        self.type_head = Linear(h, num_types, rng)
        self.edge_head = MLP([2 * h, h, h, 1], rng)
        self.quality_head = MLP([2 * h, h, h, 1], rng)

    def run_gin(self, x: Tensor, src: np.ndarray, dst: np.ndarray) -> Tensor:
        h = x
        for layer in self.gin:
            h = layer(h, src, dst)
        return h

    def run_transformer(self, h_g: Tensor, pe: Tensor | np.ndarray) -> Tensor:
        pe_t = pe if isinstance(pe, Tensor) else Tensor(pe)
        x = h_g + self.pe_proj(pe_t)
        for layer in self.transformer:
            x = layer(x)
        return self.final_norm(x)

    def encode(
        self,
        x: Tensor | np.ndarray,
        src: np.ndarray,
        dst: np.ndarray,
        pe: Tensor | np.ndarray,
        mask: np.ndarray | None = None,
    ) -> Tensor:
        """Full encoder pass. When `mask` is given, the post-GIN embeddings at
        masked positions are replaced by the [MASK] parameter before the
        Transformer; raw inputs and graph structure are never altered.
        """
        x_t = x if isinstance(x, Tensor) else Tensor(x)
        h_g = self.run_gin(x_t, src, dst)
        if mask is not None:
            h_g = masked_row_replace(h_g, mask, self.mask_embed)
        return self.run_transformer(h_g, pe)

    def quality_from_embeddings(self, h_t: Tensor) -> tuple[Tensor, Tensor]:
        """(scalar prediction, penultimate activation) from node embeddings."""
        pooled = reshape(mean_max_pool(h_t), (1, 2 * self.hidden_dim))
        pred, penult = self.quality_head.forward_with_penultimate(pooled)
        return reshape(pred, ()), reshape(penult, (self.hidden_dim,))


class TeacherModel(Module):
    """Residual GIN stack over netlist cell features with a regression head."""

    def __init__(
        self,
        in_dim: int,
        rng: np.random.Generator,
        hidden_dim: int = 128,
        gin_layers: int = 20,
    ):
        h = hidden_dim
        self.hidden_dim = h
        self.input_proj = Linear(in_dim, h, rng)
        self.gin = [GinLayer(h, h, rng) for _ in range(gin_layers)]
        self.quality_head = MLP([2 * h, h, h, 1], rng)

    def encode(self, x: Tensor | np.ndarray, src: np.ndarray, dst: np.ndarray) -> Tensor:
        h = self.input_proj(x if isinstance(x, Tensor) else Tensor(x))
        for layer in self.gin:
            h = h + layer(h, src, dst)
        return h

    def predict(
        self, x: Tensor | np.ndarray, src: np.ndarray, dst: np.ndarray
    ) -> tuple[Tensor, Tensor]:
        h = self.encode(x, src, dst)
        pooled = reshape(mean_max_pool(h), (1, 2 * self.hidden_dim))
        pred, penult = self.quality_head.forward_with_penultimate(pooled)
        return reshape(pred, ()), reshape(penult, (self.hidden_dim,))
