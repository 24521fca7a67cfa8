"""AdamW with decoupled weight decay, plus the linear-warmup schedule."""
from __future__ import annotations

import numpy as np

from .layers import Parameter


def linear_warmup_lr(step: int, total_steps: int, base_lr: float,
                     warmup_frac: float) -> float:
    """lr ramps linearly 0 -> base over warmup_frac * total steps, then holds."""
    if not 0.0 <= warmup_frac <= 1.0:
        raise ValueError(f"warmup_frac must be in [0, 1], got {warmup_frac}")
    warmup_steps = warmup_frac * total_steps
    if warmup_steps <= 0 or step + 1 >= warmup_steps:
        return base_lr
    return base_lr * (step + 1) / warmup_steps


class AdamW:
    def __init__(self, params: list[Parameter], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.01):
        self.params = [p for p in params if not p.frozen]
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.tensor.grad = None

    def step(self, lr: float | None = None):
        lr = self.lr if lr is None else lr
        self.t += 1
        bc1 = 1.0 - self.b1 ** self.t
        bc2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.tensor.grad
            if g is None:
                continue
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.tensor.data -= lr * (update + self.weight_decay * p.data)
