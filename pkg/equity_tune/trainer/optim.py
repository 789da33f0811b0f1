"""First-order optimizers over named tensors."""

from typing import Dict, Mapping

import numpy as np

from ..numerics import Tensor


class Sgd:
    """Plain gradient descent: p <- p - lr * g."""

    def __init__(self, learning_rate: float):
        """Store the step size."""
        self.learning_rate = learning_rate

    def step(
        self, params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray]
    ) -> Dict[str, Tensor]:
        """Return updated copies of the parameters that have gradients."""
        return {
            name: Tensor(params[name].data - self.learning_rate * grads[name], op="sgd")
            for name in grads
        }


class Adam:
    """Adam with bias correction; moments are kept per parameter name."""

    def __init__(self, learning_rate: float, beta1=0.9, beta2=0.999, eps=1e-8):
        """Store hyperparameters and start with empty moments."""
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.first: Dict[str, np.ndarray] = {}
        self.second: Dict[str, np.ndarray] = {}
        self.steps: Dict[str, int] = {}

    def step(
        self, params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray]
    ) -> Dict[str, Tensor]:
        """Return updated copies of the parameters that have gradients."""
        updated = {}
        for name, grad in grads.items():
            t = self.steps.get(name, 0) + 1
            m = self.beta1 * self.first.get(name, 0.0) + (1 - self.beta1) * grad
            v = self.beta2 * self.second.get(name, 0.0) + (1 - self.beta2) * grad ** 2
            self.first[name], self.second[name], self.steps[name] = m, v, t
            m_hat = m / (1 - self.beta1 ** t)
            v_hat = v / (1 - self.beta2 ** t)
            delta = self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
            updated[name] = Tensor(params[name].data - delta, op="adam")
        return updated


def make_optimizer(name: str, learning_rate: float):
    """Build an optimizer by config name."""
    if name == "sgd":
        return Sgd(learning_rate)
    if name == "adam":
        return Adam(learning_rate)
    raise ValueError(f"Unknown optimizer {name}")
