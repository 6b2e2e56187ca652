"""Adam and Nesterov-momentum optimizers over a model's named parameters.

Both follow the update forms used by Lasagne:

Adam::

    t += 1
    a_t = lr * sqrt(1 - beta2**t) / (1 - beta1**t)
    m = beta1 * m + (1 - beta1) * g
    v = beta2 * v + (1 - beta2) * g**2
    p -= a_t * m / (sqrt(v) + eps)

Nesterov momentum::

    vel = momentum * vel - lr * g
    p += momentum * vel - lr * g
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from vacgan.autodiff.tensor import Tensor
from vacgan.errors import InvalidConfig, NonFinite

KINDS = ("adam", "nesterov_momentum")


@dataclass
class OptimizerState:
    kind: str = "adam"
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    momentum: float = 0.9
    epsilon: float = 1e-8
    step_count: int = 0
    moments: dict[str, tuple[np.ndarray, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfig(f"unknown optimizer {self.kind!r}")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be positive")

    def step(self, model, grads: dict[Tensor, Tensor]) -> None:
        """Apply one update to every parameter of ``model`` that has a gradient."""
        self.step_count += 1
        t = self.step_count
        if self.kind == "adam":
            a_t = self.learning_rate * math.sqrt(1 - self.beta2 ** t) / (1 - self.beta1 ** t)
        updated = {}
        for name, param in model.params.items():
            g_t = grads.get(param)
            if g_t is None:
                continue
            g = g_t.data
            p = param.data
            if self.kind == "adam":
                m, v = self.moments.get(name, (np.zeros_like(p), np.zeros_like(p)))
                m = self.beta1 * m + (1 - self.beta1) * g
                v = self.beta2 * v + (1 - self.beta2) * g * g
                new = p - a_t * m / (np.sqrt(v) + self.epsilon)
                self.moments[name] = (m, v)
            else:
                (vel,) = self.moments.get(name, (np.zeros_like(p),))
                vel = self.momentum * vel - self.learning_rate * g
                new = p + self.momentum * vel - self.learning_rate * g
                self.moments[name] = (vel,)
            if not np.all(np.isfinite(new)):
                raise NonFinite(f"optimizer produced non-finite values for {name}")
            updated[name] = Tensor(new)
        model.set_params(updated)


def adam(learning_rate=1e-4, beta1=0.5, beta2=0.999) -> OptimizerState:
    return OptimizerState("adam", learning_rate, beta1=beta1, beta2=beta2)


def nesterov(learning_rate=0.01, momentum=0.9) -> OptimizerState:
    return OptimizerState("nesterov_momentum", learning_rate, momentum=momentum)
