"""Adam and AdamW with per-group learning rate / weight decay.

Adam applies coupled L2 (decay folded into the gradient); AdamW decays the
parameter directly before the moment update. Parameters whose grad is None
are skipped entirely.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    decoupled = False

    def __init__(
        self,
        groups: list[dict],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.groups = []
        for group in groups:
            params = list(group["params"])
            self.groups.append(
                {
                    "params": params,
                    "lr": float(group["lr"]),
                    "weight_decay": float(group.get("weight_decay", 0.0)),
                    "m": [np.zeros_like(p.data) for p in params],
                    "v": [np.zeros_like(p.data) for p in params],
                }
            )
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    @classmethod
    def for_params(cls, params: list[Tensor], lr: float, weight_decay: float = 0.0, **kw):
        return cls([{"params": params, "lr": lr, "weight_decay": weight_decay}], **kw)

    def zero_grad(self) -> None:
        for group in self.groups:
            for p in group["params"]:
                p.grad = None

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for group in self.groups:
            lr, wd = group["lr"], group["weight_decay"]
            for p, m, v in zip(group["params"], group["m"], group["v"]):
                if p.grad is None:
                    continue
                if self.decoupled and wd:
                    p.data -= lr * wd * p.data
                    g = p.grad
                elif wd:
                    g = p.grad + wd * p.data
                else:
                    g = p.grad
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


class AdamW(Adam):
    decoupled = True
