"""Densities, quadrature divergences and checks of the optimal-classifier results.

All integrals use the midpoint rule on a uniform grid; natural logarithms
throughout, so the cross-entropy ceiling is ``log 4`` nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from vacgan.autodiff.tensor import Tensor
from vacgan.errors import EmptyBinRange, Infinite, InvalidSpec, ShapeMismatch, ZeroDensity

LOG4 = math.log(4.0)
LOG2 = math.log(2.0)


# -- densities ---------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def make(cls, mean, cov) -> "Gaussian":
        mu = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        c = np.asarray(cov, dtype=np.float64)
        if c.ndim == 0:
            c = np.eye(mu.size) * c
        if c.shape != (mu.size, mu.size) or np.any(np.linalg.eigvalsh(c) <= 0):
            raise InvalidSpec("covariance must be symmetric positive definite and match the mean")
        return cls(mu, c)

    @property
    def dim(self) -> int:
        return self.mean.size

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = _points(x, self.dim)
        diff = x - self.mean
        inv = np.linalg.inv(self.cov)
        q = np.einsum("ni,ij,nj->n", diff, inv, diff)
        norm = math.sqrt((2 * math.pi) ** self.dim * np.linalg.det(self.cov))
        return np.exp(-0.5 * q) / norm

    def extent(self, n_sigma: float) -> list[tuple[float, float]]:
        sd = np.sqrt(np.diag(self.cov))
        return [(m - n_sigma * s, m + n_sigma * s) for m, s in zip(self.mean, sd)]


@dataclass(frozen=True)
class GaussianMixture:
    weights: np.ndarray
    components: tuple[Gaussian, ...]

    @classmethod
    def make(cls, weights, means, covs) -> "GaussianMixture":
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise InvalidSpec("mixture weights must be non-negative and sum to 1")
        comps = tuple(Gaussian.make(m, c) for m, c in zip(means, covs))
        if len(comps) != w.size or len({c.dim for c in comps}) != 1:
            raise InvalidSpec("mixture components must match weights and share a dimension")
        return cls(w, comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return sum(w * c.pdf(x) for w, c in zip(self.weights, self.components))

    def extent(self, n_sigma: float) -> list[tuple[float, float]]:
        boxes = [c.extent(n_sigma) for c in self.components]
        return [(min(b[d][0] for b in boxes), max(b[d][1] for b in boxes)) for d in range(self.dim)]


@dataclass(frozen=True)
class Histogram:
    """Piecewise-constant density over uniform or non-uniform bins (1-D or 2-D)."""

    edges: tuple[np.ndarray, ...]
    masses: np.ndarray

    @classmethod
    def make(cls, edges, masses) -> "Histogram":
        if np.ndim(edges[0]) == 0:  # a flat sequence of edges is one axis
            edges = [edges]
        e = tuple(np.asarray(a, dtype=np.float64) for a in edges)
        m = np.asarray(masses, dtype=np.float64)
        if m.shape != tuple(len(a) - 1 for a in e) or np.any(m < 0) or m.sum() <= 0:
            raise InvalidSpec("histogram masses must be non-negative, non-empty and match the bins")
        return cls(e, m / m.sum())

    @property
    def dim(self) -> int:
        return len(self.edges)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = _points(x, self.dim)
        idx, inside = [], np.ones(len(x), dtype=bool)
        for d, e in enumerate(self.edges):
            i = np.searchsorted(e, x[:, d], side="right") - 1
            i = np.where(x[:, d] == e[-1], len(e) - 2, i)
            inside &= (i >= 0) & (i < len(e) - 1)
            idx.append(np.clip(i, 0, len(e) - 2))
        vol = np.ones(len(x))
        for d, e in enumerate(self.edges):
            vol = vol * np.diff(e)[idx[d]]
        return np.where(inside, self.masses[tuple(idx)] / vol, 0.0)

    def extent(self, n_sigma: float = 0.0) -> list[tuple[float, float]]:
        return [(float(e[0]), float(e[-1])) for e in self.edges]


Density = Gaussian | GaussianMixture | Histogram


def _points(x, dim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if dim == 1 and arr.ndim <= 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != dim:
        raise ShapeMismatch(f"points of dimension {arr.shape[1]} for a {dim}-D density")
    return arr


# -- grids -------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform midpoint grid: ``resolution[d]`` cells across ``ranges[d]``."""

    ranges: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]

    @classmethod
    def make(cls, ranges, resolution) -> "Grid":
        ranges = tuple((float(a), float(b)) for a, b in ranges)
        if isinstance(resolution, int):
            resolution = (resolution,) * len(ranges)
        if len(resolution) != len(ranges) or any(b <= a for a, b in ranges) or any(r < 1 for r in resolution):
            raise InvalidSpec("grid ranges must be increasing with one positive resolution per axis")
        return cls(ranges, tuple(int(r) for r in resolution))

    @classmethod
    def covering(cls, densities: Sequence, resolution: Optional[int] = None, n_sigma: float = 12.0) -> "Grid":
        """Grid over the union of the densities' ``n_sigma`` boxes.

        Default resolution is 2001 cells per axis in 1-D and 301 in 2-D.
        """
        dim = densities[0].dim
        boxes = [d.extent(n_sigma) for d in densities]
        ranges = [(min(b[k][0] for b in boxes), max(b[k][1] for b in boxes)) for k in range(dim)]
        if resolution is None:
            resolution = 2001 if dim == 1 else 301
        return cls.make(ranges, resolution)

    @property
    def dim(self) -> int:
        return len(self.ranges)

    @property
    def axes(self) -> list[np.ndarray]:
        out = []
        for (a, b), n in zip(self.ranges, self.resolution):
            h = (b - a) / n
            out.append(a + h * (np.arange(n) + 0.5))
        return out

    @property
    def cell_volume(self) -> float:
        return float(np.prod([(b - a) / n for (a, b), n in zip(self.ranges, self.resolution)]))

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def mass(self, density) -> float:
        return float(density.pdf(self.points()).sum() * self.cell_volume)


def _xlogy_ratio(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # p * log(p / q) with the 0 * log 0 = 0 convention
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * (np.log(p[pos]) - np.log(q[pos]))
    return out


# -- divergences ---------------------------------------------------------------

def optimal_classifier(p1, p2, x) -> float | np.ndarray:
    """``p1(x) / (p1(x) + p2(x))``, the Bayes posterior of class 1 under equal priors."""
    a = p1.pdf(x)
    b = p2.pdf(x)
    total = a + b
    if np.any(total <= 0):
        raise ZeroDensity("both densities vanish at a query point")
    out = a / total
    return float(out[0]) if np.ndim(x) <= 1 and out.size == 1 else out


def kl_values(p: np.ndarray, q: np.ndarray, cell_volume: float) -> float:
    if np.any((p > 0) & (q <= 0)):
        raise Infinite("p has mass where q vanishes")
    return float(_xlogy_ratio(p, q).sum() * cell_volume)


def kl(p, q, grid: Grid) -> float:
    """Kullback-Leibler divergence ``KL(p || q)`` by midpoint quadrature."""
    pts = grid.points()
    return kl_values(p.pdf(pts), q.pdf(pts), grid.cell_volume)


def jsd_values(a: np.ndarray, b: np.ndarray, cell_volume: float) -> float:
    m = 0.5 * (a + b)
    # symmetric evaluation order: jsd(a, b) == jsd(b, a) bit for bit
    ka = _xlogy_ratio(a, m)
    kb = _xlogy_ratio(b, m)
    return float(0.5 * ((ka + kb).sum()) * cell_volume)


def jsd(p1, p2, grid: Grid) -> float:
    """Jensen-Shannon divergence against the equal mixture, in ``[0, log 2]``."""
    pts = grid.points()
    return jsd_values(p1.pdf(pts), p2.pdf(pts), grid.cell_volume)


def ce_values(a: np.ndarray, b: np.ndarray, cell_volume: float) -> float:
    s = a + b
    integrand = -(_xlogy_ratio(a, s) + _xlogy_ratio(b, s))
    return float(integrand.sum() * cell_volume)


def ce_of_optimal_classifier(p1, p2, grid: Grid) -> float:
    """Cross-entropy of the optimal classifier:

    ``-int p1 log(p1 / (p1 + p2)) - int p2 log(p2 / (p1 + p2))``.
    """
    pts = grid.points()
    return ce_values(p1.pdf(pts), p2.pdf(pts), grid.cell_volume)


# -- sample-based estimate -------------------------------------------------------

def rice_bins(n: int) -> int:
    return max(1, int(math.ceil(2.0 * n ** (1.0 / 3.0))))


def histogram_grid(samples1: np.ndarray, samples2: np.ndarray, bins: Optional[int] = None, margin: float = 1e-9) -> Grid:
    """Shared bins spanning both sample sets; Rice rule bin count by default."""
    a = np.asarray(samples1, dtype=np.float64)
    b = np.asarray(samples2, dtype=np.float64)
    a = a.reshape(len(a), -1)
    b = b.reshape(len(b), -1)
    both = np.concatenate([a, b])
    lo, hi = both.min(axis=0), both.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    if bins is None:
        bins = rice_bins(min(len(a), len(b)))
    return Grid.make([(l - margin * s, h + margin * s) for l, h, s in zip(lo, hi, span)], bins)


def empirical_jsd(samples1, samples2, bins: Optional[Grid] = None, min_samples: int = 100) -> float:
    """JSD between the histograms of two sample sets on a shared grid.

    Each grid cell is a histogram bin; empty bins contribute zero. Samples
    outside the grid are dropped.
    """
    a = np.asarray(samples1.data if hasattr(samples1, "data") else samples1, dtype=np.float64)
    b = np.asarray(samples2.data if hasattr(samples2, "data") else samples2, dtype=np.float64)
    a = a.reshape(len(a), -1)
    b = b.reshape(len(b), -1)
    if len(a) < min_samples or len(b) < min_samples:
        raise InvalidSpec(f"need at least {min_samples} samples per side, got {len(a)} and {len(b)}")
    if a.shape[1] != b.shape[1]:
        raise ShapeMismatch("sample sets differ in dimension")
    grid = bins if bins is not None else histogram_grid(a, b)
    if grid.dim != a.shape[1]:
        raise ShapeMismatch(f"{grid.dim}-D bins for {a.shape[1]}-D samples")
    edges = [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(grid.ranges, grid.resolution)]
    ha, _ = np.histogramdd(a, bins=edges)
    hb, _ = np.histogramdd(b, bins=edges)
    if ha.sum() == 0 or hb.sum() == 0:
        raise EmptyBinRange("all samples of one set fall outside the bins")
    pa = (ha / ha.sum()).reshape(-1)
    pb = (hb / hb.sum()).reshape(-1)
    return jsd_values(pa, pb, 1.0)


# -- optimal-classifier checks ---------------------------------------------------

def log_objective(f, m: float, n: float):
    """``m log f + n log(1 - f)``, the quantity the optimal classifier maximises pointwise."""
    f = np.asarray(f, dtype=np.float64)
    return m * np.log(f) + n * np.log1p(-f)


def scan_maximizer(m: float, n: float, resolution: int = 100_001) -> float:
    """Grid argmax of :func:`log_objective` over the open interval (0, 1)."""
    f = (np.arange(resolution) + 0.5) / resolution
    return float(f[np.argmax(log_objective(f, m, n))])


def central_interval(p1, p2, mass: float = 0.99, grid: Optional[Grid] = None) -> tuple[float, float]:
    """Equal-tailed interval holding ``mass`` of the 1-D mixture ``(p1 + p2) / 2``."""
    if p1.dim != 1:
        raise ShapeMismatch("central_interval is defined for 1-D densities")
    grid = grid or Grid.covering([p1, p2], resolution=20001)
    x = grid.axes[0]
    h = x[1] - x[0]
    cdf = np.cumsum(0.5 * (p1.pdf(x) + p2.pdf(x)) * h)
    cdf /= cdf[-1]
    tail = (1.0 - mass) / 2.0
    lo = np.interp(tail, cdf, x + h / 2)
    hi = np.interp(1.0 - tail, cdf, x + h / 2)
    return float(lo), float(hi)


def verify_proposition1(p1, p2, classifier: Callable[[np.ndarray], np.ndarray], grid: Grid) -> float:
    """Max absolute gap between ``classifier`` and the optimal classifier on ``grid``.

    ``classifier`` maps an ``(n, dim)`` array to ``n`` probabilities of class 1
    (the class whose density is ``p1``). A :class:`vacgan.models.Model` works.
    """
    pts = grid.points()
    out = classifier(Tensor(pts)) if _is_model(classifier) else classifier(pts)
    pred = np.asarray(out.data if hasattr(out, "data") else out, dtype=np.float64).reshape(-1)
    return float(np.max(np.abs(pred - optimal_classifier(p1, p2, pts))))


def _is_model(obj) -> bool:
    return hasattr(obj, "params") and hasattr(obj, "layers")
