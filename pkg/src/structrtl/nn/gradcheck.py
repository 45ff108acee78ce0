"""Central finite-difference gradient verification at float64."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor, no_grad


def finite_difference_check(
    build_loss: Callable[[], Tensor],
    params: list[Tensor],
    eps: float = 1e-6,
    rel_floor: float = 1e-3,
) -> float:
    """Max relative error between backprop and central differences.

    `build_loss` must rebuild the forward graph on every call (graphs are
    single-use). Relative error uses max(|analytic|, |numeric|, rel_floor) as
    denominator so near-zero gradients are compared absolutely.
    """
    for p in params:
        p.grad = None
    loss = build_loss()
    loss.backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    for p in params:
        p.grad = None

    max_err = 0.0
    with no_grad():
        for p, ana in zip(params, analytic):
            flat = p.data.reshape(-1)
            ana_flat = ana.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                f_plus = build_loss().item()
                flat[i] = orig - eps
                f_minus = build_loss().item()
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2.0 * eps)
                denom = max(abs(ana_flat[i]), abs(numeric), rel_floor)
                max_err = max(max_err, abs(ana_flat[i] - numeric) / denom)
    return max_err
