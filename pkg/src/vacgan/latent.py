"""Partitioned latent space: the sign of one coordinate selects the class."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vacgan.autodiff.tensor import Tensor
from vacgan.errors import Boundary, InvalidConfig, ShapeMismatch


@dataclass(frozen=True)
class LatentSpec:
    dim: int
    partition_axis: int = 0
    num_classes: int = 2

    def __post_init__(self):
        if self.dim <= 0:
            raise InvalidConfig("latent dim must be positive")
        if not 0 <= self.partition_axis < self.dim:
            raise InvalidConfig(f"partition_axis {self.partition_axis} outside 0..{self.dim - 1}")
        if self.num_classes != 2:
            raise InvalidConfig("only two classes are supported")


def _nonzero_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal(n)
    while True:
        zero = g == 0.0
        if not zero.any():
            return g
        g[zero] = rng.standard_normal(int(zero.sum()))


def sample(spec: LatentSpec, class_label: int, n: int, rng: np.random.Generator) -> Tensor:
    """Draw ``n`` latent vectors belonging to ``class_label``.

    All coordinates are standard normal; the partition coordinate is replaced
    by ``-|g|`` for class 0 and ``+|g|`` for class 1.
    """
    if class_label not in (0, 1):
        raise InvalidConfig(f"class label must be 0 or 1, got {class_label!r}")
    if n < 1:
        raise InvalidConfig("n must be at least 1")
    z = rng.standard_normal((n, spec.dim))
    mag = np.abs(_nonzero_normal(rng, n))
    z[:, spec.partition_axis] = mag if class_label == 1 else -mag
    return Tensor(z)


def sample_balanced(spec: LatentSpec, n: int, rng: np.random.Generator) -> tuple[Tensor, np.ndarray]:
    """Half class-0 and half class-1 latents (class 0 first), with their labels."""
    n0 = n // 2
    z0 = sample(spec, 0, n0, rng).data if n0 else np.empty((0, spec.dim))
    z1 = sample(spec, 1, n - n0, rng).data
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n - n0, dtype=np.int64)])
    return Tensor(np.concatenate([z0, z1])), labels


def classify_latent(spec: LatentSpec, z) -> int:
    """Class owning the single latent vector ``z``."""
    arr = np.asarray(z.data if isinstance(z, Tensor) else z, dtype=np.float64).reshape(-1)
    if arr.size != spec.dim:
        raise ShapeMismatch(f"latent vector has {arr.size} coordinates, expected {spec.dim}")
    v = arr[spec.partition_axis]
    if v == 0.0:
        raise Boundary("latent vector lies on the partition boundary")
    return 0 if v < 0 else 1


def classify_latents(spec: LatentSpec, z) -> np.ndarray:
    """Vectorised :func:`classify_latent` over the rows of ``z``."""
    arr = np.asarray(z.data if isinstance(z, Tensor) else z, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != spec.dim:
        raise ShapeMismatch(f"expected (n, {spec.dim}) latents, got {arr.shape}")
    col = arr[:, spec.partition_axis]
    if np.any(col == 0.0):
        raise Boundary("latent vector lies on the partition boundary")
    return (col > 0).astype(np.int64)


def label_concat(z: Tensor, labels: np.ndarray) -> Tensor:
    """Append a one-hot class code to each latent row."""
    onehot = np.eye(2)[np.asarray(labels, dtype=np.int64)]
    return Tensor(np.concatenate([z.data, onehot], axis=1))
