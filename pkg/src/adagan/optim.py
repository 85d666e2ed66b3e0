"""Adaptive-moment optimizer over named parameter dictionaries."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    """Standard bias-corrected adaptive moments; β₁=0 by default.

    Parameters are updated in place. Moment buffers are exposed as named
    arrays so checkpoints can serialize and restore them exactly.
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float,
        beta1: float = 0.0,
        beta2: float = 0.99,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = {k: np.zeros(p.shape) for k, p in params.items()}
        self.v = {k: np.zeros(p.shape) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad.data
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        """Moment buffers under stable names for checkpointing."""
        out = {}
        for name in self.params:
            out[f"{prefix}.m.{name}"] = self.m[name]
            out[f"{prefix}.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, prefix: str, arrays: dict[str, np.ndarray], t: int) -> None:
        self.t = int(t)
        for name in self.params:
            self.m[name] = np.array(arrays[f"{prefix}.m.{name}"], dtype=np.float64)
            self.v[name] = np.array(arrays[f"{prefix}.v.{name}"], dtype=np.float64)
