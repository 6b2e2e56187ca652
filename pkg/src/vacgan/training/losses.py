"""Loss functions and the BEGAN equilibrium update."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from vacgan.autodiff import ops
from vacgan.autodiff.tensor import Tensor
from vacgan.errors import InvalidConfig, NonFinite, ShapeMismatch

BCE_EPS = 1e-7


def bce(prediction: Tensor, target) -> Tensor:
    """Mean binary cross-entropy with predictions clamped to ``[eps, 1 - eps]``."""
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if t.shape != prediction.shape:
        raise ShapeMismatch(f"bce: prediction {prediction.shape} vs target {t.shape}")
    p = ops.clip(prediction, BCE_EPS, 1.0 - BCE_EPS)
    log_p = ops.log(p)
    log_q = ops.log(ops.sub(Tensor(np.ones_like(t)), p))
    # -(t log p + (1 - t) log(1 - p))
    per = ops.add(ops.mul(Tensor(t), log_p), ops.mul(Tensor(1.0 - t), log_q))
    return ops.scale(ops.mean(per), -1.0)


def autoencoder_loss(v: Tensor, reconstruction: Tensor) -> Tensor:
    """``L(v) = |v - D(v)|^2`` as the mean squared element-wise difference."""
    if v.shape != reconstruction.shape:
        raise ShapeMismatch(f"autoencoder_loss: {v.shape} vs {reconstruction.shape}")
    return ops.mean(ops.square(ops.sub(v, reconstruction)))


@dataclass(frozen=True)
class BeganState:
    k_t: float = 0.0
    lambda_k: float = 0.001
    gamma: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.k_t <= 1.0:
            raise InvalidConfig(f"k_t={self.k_t} outside [0, 1]")
        if self.lambda_k <= 0:
            raise InvalidConfig("lambda_k must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidConfig("gamma must lie in (0, 1]")


def began_k_update(state: BeganState, loss_real: float, loss_fake: float) -> BeganState:
    """``k <- clamp(k + lambda_k * (gamma * L(x) - L(G(z))), 0, 1)``."""
    if not (math.isfinite(loss_real) and math.isfinite(loss_fake)):
        raise NonFinite("BEGAN losses must be finite")
    k = state.k_t + state.lambda_k * (state.gamma * loss_real - loss_fake)
    return replace(state, k_t=min(max(k, 0.0), 1.0))


def convergence_measure(state: BeganState, loss_real: float, loss_fake: float) -> float:
    """BEGAN's ``M = L(x) + |gamma L(x) - L(G(z))|``."""
    return loss_real + abs(state.gamma * loss_real - loss_fake)


@dataclass(frozen=True)
class VacGanWeights:
    """Generator loss weights: ``vartheta * base + zeta * BCE``."""

    vartheta: float = 0.997
    zeta: float = 0.003

    def __post_init__(self):
        if self.vartheta < 0 or self.zeta < 0 or self.vartheta + self.zeta <= 0:
            raise InvalidConfig("weights must be non-negative with a positive sum")


def began_discriminator_loss(loss_real: Tensor, loss_fake: Tensor, k_t: float) -> Tensor:
    """``L_d = L(x) - k_t L(G(z))``."""
    return ops.sub(loss_real, ops.scale(loss_fake, k_t))


def gan_discriminator_loss(score_real: Tensor, score_fake: Tensor) -> Tensor:
    """``BCE(D(x), 1) + BCE(D(G(z)), 0)`` on sigmoid scores."""
    return ops.add(
        bce(score_real, np.ones(score_real.shape)),
        bce(score_fake, np.zeros(score_fake.shape)),
    )


def gan_generator_loss(score_fake: Tensor, kind: str = "non_saturating") -> Tensor:
    """Non-saturating ``BCE(D(G(z)), 1)`` or the minimax ``-BCE(D(G(z)), 0)``."""
    if kind == "non_saturating":
        return bce(score_fake, np.ones(score_fake.shape))
    return ops.scale(bce(score_fake, np.zeros(score_fake.shape)), -1.0)


def vacgan_generator_loss(base: Tensor, classification: Tensor, weights: VacGanWeights) -> Tensor:
    """``vartheta * base + zeta * classification``."""
    return ops.add(ops.scale(base, weights.vartheta), ops.scale(classification, weights.zeta))
