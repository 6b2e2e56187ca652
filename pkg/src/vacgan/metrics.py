"""Image similarity metrics and the intra/inter-class pairwise protocol.

Images are 2-D float arrays with pixels in ``[0, 1]``.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from vacgan.errors import AllWindowsDegenerate, BadFormat, DimensionMismatch, NoPairs

METRICS = ("mse", "rmse", "mae", "uqi", "ssim")
OBSERVATIONS = ("intra_class_a", "intra_class_b", "inter_class")
UQI_WINDOW = 8
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03
DEGENERATE = 1e-12


def _pair(f, g) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(f, dtype=np.float64)
    b = np.asarray(g, dtype=np.float64)
    if a.ndim == 3 and a.shape[0] == 1:
        a = a[0]
    if b.ndim == 3 and b.shape[0] == 1:
        b = b[0]
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionMismatch(f"images of shape {a.shape} and {b.shape}")
    return a, b


def _mse_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a - b
    return (d * d).mean(axis=(-2, -1))


def _mae_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b).mean(axis=(-2, -1))


def _uqi_batch(a: np.ndarray, b: np.ndarray, window: int) -> np.ndarray:
    wa = sliding_window_view(a, (window, window), axis=(-2, -1))
    wb = sliding_window_view(b, (window, window), axis=(-2, -1))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = (da * da).mean(axis=(-2, -1))
    var_b = (db * db).mean(axis=(-2, -1))
    cov = (da * db).mean(axis=(-2, -1))
    denom = (var_a + var_b) * (mu_a * mu_a + mu_b * mu_b)
    ok = denom >= DEGENERATE
    q = np.where(ok, 4.0 * cov * (mu_a * mu_b) / np.where(ok, denom, 1.0), 0.0)
    n_ok = ok.sum(axis=(-2, -1))
    if np.any(n_ok == 0):
        raise AllWindowsDegenerate("every window has zero variance or zero mean")
    return q.sum(axis=(-2, -1)) / n_ok


def _ssim_map_batch(a: np.ndarray, b: np.ndarray, window: int, sigma: float, data_range: float = 1.0) -> np.ndarray:
    w = gaussian_window(window, sigma)
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    wa = sliding_window_view(a, (window, window), axis=(-2, -1))
    wb = sliding_window_view(b, (window, window), axis=(-2, -1))

    def filt(x):
        return np.einsum("...ij,ij->...", x, w)

    mu_a, mu_b = filt(wa), filt(wb)
    var_a = filt(wa * wa) - mu_a * mu_a
    var_b = filt(wb * wb) - mu_b * mu_b
    cov = filt(wa * wb) - mu_a * mu_b
    num = (2 * (mu_a * mu_b) + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def mse(f, g) -> float:
    """Mean of squared pixel differences."""
    a, b = _pair(f, g)
    return float(_mse_batch(a, b))


def rmse(f, g) -> float:
    return float(np.sqrt(mse(f, g)))


def mae(f, g) -> float:
    a, b = _pair(f, g)
    return float(_mae_batch(a, b))


def uqi(f, g, window: int = UQI_WINDOW) -> float:
    """Universal quality index averaged over all ``window x window`` positions.

    Each window contributes ``4 cov mu_f mu_g / ((var_f + var_g)(mu_f^2 + mu_g^2))``.
    Windows whose denominator is below 1e-12 are left out of the mean.
    """
    a, b = _pair(f, g)
    if window < 1 or window > min(a.shape):
        raise DimensionMismatch(f"window {window} does not fit a {a.shape} image")
    return float(_uqi_batch(a, b, window))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(f, g, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA, data_range: float = 1.0) -> np.ndarray:
    """Local SSIM at every valid window position (Gaussian-weighted statistics)."""
    a, b = _pair(f, g)
    if window > min(a.shape):
        raise DimensionMismatch(f"SSIM window {window} exceeds image shape {a.shape}")
    return _ssim_map_batch(a, b, window, sigma, data_range)


def ssim(f, g, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> float:
    """Mean SSIM with an 11x11, sigma 1.5 Gaussian window and K1=0.01, K2=0.03."""
    return float(ssim_map(f, g, window, sigma).mean())


def fitting_ssim_window(shape: Sequence[int]) -> int:
    """Largest odd window not exceeding 11 that fits ``shape``."""
    side = min(SSIM_WINDOW, min(shape))
    return side if side % 2 else side - 1


@dataclass
class MetricReport:
    """Per-metric means over the three pair groups, plus the pair counts used."""

    values: dict[str, tuple[float, float, float]]
    pair_counts: tuple[int, int, int]
    ssim_window: int = SSIM_WINDOW
    uqi_window: int = UQI_WINDOW

    def get(self, metric: str, observation: str) -> float:
        return self.values[metric][OBSERVATIONS.index(observation)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", *OBSERVATIONS])
        for m in METRICS:
            w.writerow([m, *(repr(float(v)) for v in self.values[m])])
        w.writerow(["pairs", *self.pair_counts])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MetricReport":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][:1] != ["metric"]:
            raise BadFormat("report CSV lacks a 'metric' header")
        header = rows[0][1:]
        missing = [o for o in OBSERVATIONS if o not in header]
        if missing:
            raise BadFormat(f"report CSV is missing column {missing[0]}")
        col = {o: header.index(o) + 1 for o in OBSERVATIONS}
        values, counts = {}, (0, 0, 0)
        for row in rows[1:]:
            if not row:
                continue
            if row[0] == "pairs":
                counts = tuple(int(row[col[o]]) for o in OBSERVATIONS)
            else:
                values[row[0]] = tuple(float(row[col[o]]) for o in OBSERVATIONS)
        for m in METRICS:
            if m not in values:
                raise BadFormat(f"report CSV is missing metric {m}")
        return cls(values, counts)


def _metrics_batch(a: np.ndarray, b: np.ndarray, uqi_window: int, ssim_window: int) -> np.ndarray:
    m = _mse_batch(a, b)
    return np.stack(
        [m, np.sqrt(m), _mae_batch(a, b), _uqi_batch(a, b, uqi_window),
         _ssim_map_batch(a, b, ssim_window, SSIM_SIGMA).mean(axis=(-2, -1))],
        axis=1,
    )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("VACGAN_THREADS", "1")))
    except ValueError:
        return 1


def _mean_over(pairs, imgs_a: np.ndarray, imgs_b: np.ndarray, uqi_window, ssim_window, label, block=512) -> np.ndarray:
    if not pairs:
        raise NoPairs(f"no pairs available for {label}")
    idx = np.asarray(pairs, dtype=np.int64)
    chunks = [idx[k:k + block] for k in range(0, len(idx), block)]

    def one(chunk):
        try:
            return _metrics_batch(imgs_a[chunk[:, 0]], imgs_b[chunk[:, 1]], uqi_window, ssim_window)
        except AllWindowsDegenerate:
            # locate the offending pair for the message
            for i, j in chunk:
                try:
                    _uqi_batch(imgs_a[i], imgs_b[j], uqi_window)
                except AllWindowsDegenerate as exc:
                    raise AllWindowsDegenerate(f"{label} pair ({i}, {j}): {exc}") from exc
            raise

    n_threads = _threads()
    if n_threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            per_pair = list(pool.map(one, chunks))  # map preserves chunk order
    else:
        per_pair = [one(c) for c in chunks]
    values = np.concatenate(per_pair)
    return values.sum(axis=0) / len(pairs)


def pairwise_report(set_a, set_b, uqi_window: Optional[int] = None, ssim_window: Optional[int] = None) -> MetricReport:
    """All five metrics averaged over unordered pairs within each set and over
    every cross pair between the sets. Self-pairs are excluded.
    """
    a = [_pair(x, x)[0] for x in set_a]
    b = [_pair(x, x)[0] for x in set_b]
    if not a or not b:
        raise NoPairs("both image sets must be non-empty")
    shape = a[0].shape
    if any(x.shape != shape for x in a + b):
        raise DimensionMismatch("all images must share one shape")
    a, b = np.stack(a), np.stack(b)
    uw = uqi_window or min(UQI_WINDOW, min(shape))
    sw = ssim_window or fitting_ssim_window(shape)
    intra_a = list(combinations(range(len(a)), 2))
    intra_b = list(combinations(range(len(b)), 2))
    inter = [(i, j) for i in range(len(a)) for j in range(len(b))]
    ra = _mean_over(intra_a, a, a, uw, sw, "intra_class_a")
    rb = _mean_over(intra_b, b, b, uw, sw, "intra_class_b")
    rx = _mean_over(inter, a, b, uw, sw, "inter_class")
    values = {m: (float(ra[k]), float(rb[k]), float(rx[k])) for k, m in enumerate(METRICS)}
    return MetricReport(values, (len(intra_a), len(intra_b), len(inter)), sw, uw)
