"""Weighted softmax cross-entropy with a numerically stable log-sum-exp."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


def softmax(scores):
    """Probabilities from raw scores; shift-invariant and overflow-safe."""
    z = scores - np.max(scores)
    e = np.exp(z)
    return e / e.sum()


def softmax_cross_entropy(scores, target_class, class_weights=None):
    """Loss and exact score gradient for one example.

    loss = -w[target] * log softmax(scores)[target]; with unit weights
    this is plain cross-entropy.  Returns ``(loss, dscores)``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if not (0 <= target_class < n):
        raise ContractError(f"target class {target_class} out of range 0..{n - 1}")
    if class_weights is None:
        class_weights = np.ones(n)
    else:
        class_weights = np.asarray(class_weights, dtype=np.float64)
        if class_weights.shape != (n,):
            raise ContractError("class_weights must match the number of classes")
        if np.any(class_weights <= 0):
            raise ContractError("class_weights must be positive")

    shifted = scores - np.max(scores)
    log_probs = shifted - np.log(np.exp(shifted).sum())
    w = class_weights[target_class]
    loss = -w * log_probs[target_class]
    dscores = w * np.exp(log_probs)
    dscores[target_class] -= w
    return float(loss), dscores
