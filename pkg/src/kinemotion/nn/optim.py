"""Adam optimizer over named parameter bundles."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


class Adam:
    """Adaptive moment estimation with bias correction.

    Moment accumulators are created lazily, keyed and shaped like the
    parameter bundle; ``step`` updates the parameters in place:

        m = b1*m + (1-b1)*g
        v = b2*v + (1-b2)*g^2
        theta -= lr * m_hat / (sqrt(v_hat) + eps)
    """

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> None:
        if set(params) != set(grads):
            raise ContractError("parameter and gradient bundles have different keys")
        if not self.m:
            self.m = {k: np.zeros_like(p) for k, p in params.items()}
            self.v = {k: np.zeros_like(p) for k, p in params.items()}
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for key, p in params.items():
            g = grads[key]
            if g.shape != p.shape:
                raise ContractError(f"gradient shape mismatch at {key}")
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
