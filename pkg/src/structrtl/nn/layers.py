"""Neural layers built on the autodiff tensors: linear/MLP, GIN message
passing, layer norm, multi-head self-attention, and joint mean/max pooling.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    Tensor,
    concat,
    gelu,
    matmul,
    param,
    scatter_add_rows,
    softmax,
    tmax,
    tmean,
    transpose,
)


class Module:
    """Minimal parameter container; discovers Tensors in attribute order."""

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    out.append((full, value))
            elif isinstance(value, Module):
                out.extend(value.named_parameters(full + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(f"{full}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out.append((f"{full}.{i}", item))
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        names = dict(self.named_parameters())
        missing = set(names) - set(state)
        extra = set(state) - set(names)
        if missing or extra:
            raise ValueError(f"state mismatch: missing={sorted(missing)}, unexpected={sorted(extra)}")
        for name, tensor in names.items():
            arr = np.asarray(state[name], dtype=tensor.data.dtype)
            if arr.shape != tensor.data.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {tensor.data.shape}")
            tensor.data = arr.copy()


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.weight = param(xavier_uniform(rng, in_dim, out_dim))
        self.bias = param(np.zeros(out_dim))

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias


class MLP(Module):
    """Stack of linear layers with GELU between them (none after the last)."""

    def __init__(self, dims: list[int], rng: np.random.Generator):
        self.layers = [Linear(dims[i], dims[i + 1], rng) for i in range(len(dims) - 1)]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i + 1 < len(self.layers):
                x = gelu(x)
        return x

    def forward_with_penultimate(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Output plus the activation entering the final linear layer."""
        for layer in self.layers[:-1]:
            x = gelu(layer(x))
        return self.layers[-1](x), x


class GinLayer(Module):
    """h'_i = MLP((1 + eps) * h_i + sum of h_j over in-edges (j, i))."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.eps = param(np.zeros(()))
        self.mlp = MLP([in_dim, out_dim, out_dim], rng)

    def __call__(self, h: Tensor, src: np.ndarray, dst: np.ndarray) -> Tensor:
        agg = scatter_add_rows(h, src, dst, h.shape[0])
        return self.mlp(h * (self.eps + 1.0) + agg)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-8):
        self.gain = param(np.ones(dim))
        self.bias = param(np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = tmean(x, axis=-1, keepdims=True)
        centered = x - mu
        var = tmean(centered * centered, axis=-1, keepdims=True)
        normed = centered * (var + self.eps) ** -0.5
        return normed * self.gain + self.bias


class MultiHeadSelfAttention(Module):
    """Full (unmasked) self-attention over all rows; one projection per head."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        head_dim = dim // heads
        self.q_proj = [Linear(dim, head_dim, rng) for _ in range(heads)]
        self.k_proj = [Linear(dim, head_dim, rng) for _ in range(heads)]
        self.v_proj = [Linear(dim, head_dim, rng) for _ in range(heads)]
        self.out_proj = Linear(dim, dim, rng)
        self._scale = 1.0 / np.sqrt(head_dim)

    def __call__(self, x: Tensor) -> Tensor:
        outputs = []
        for h in range(self.heads):
            q = self.q_proj[h](x)
            k = self.k_proj[h](x)
            v = self.v_proj[h](x)
            scores = matmul(q, transpose(k)) * self._scale
            attn = softmax(scores, axis=-1)
            outputs.append(matmul(attn, v))
        return self.out_proj(concat(outputs, axis=1))


class TransformerLayer(Module):
    """Pre-norm encoder layer: x + attn(ln(x)), then x + ff(ln(x))."""

    def __init__(self, dim: int, heads: int, ff_dim: int, rng: np.random.Generator):
        self.ln1 = LayerNorm(dim)
        self.attn = MultiHeadSelfAttention(dim, heads, rng)
        self.ln2 = LayerNorm(dim)
        self.ff = MLP([dim, ff_dim, dim], rng)

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.ff(self.ln2(x))


def mean_max_pool(h: Tensor) -> Tensor:
    """Concat of column means and column maxima: (N, H) -> (2H,)."""
    return concat([tmean(h, axis=0), tmax(h, axis=0)], axis=0)
