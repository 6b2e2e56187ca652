"""Synthetic two-class datasets and PGM corpus ingestion."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from vacgan.autodiff.tensor import make_rng
from vacgan.errors import BadFormat, BadLabel, InvalidSpec, IoError

KINDS = ("two_gaussians", "gaussian_ring_pair", "procedural_glyphs", "external")


@dataclass(frozen=True)
class LabeledBatch:
    samples: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.samples) != len(self.labels):
            raise InvalidSpec(f"{len(self.samples)} samples but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def of_class(self, c: int) -> np.ndarray:
        return self.samples[self.labels == c]


@dataclass(frozen=True)
class DatasetSpec:
    """Parameters for one dataset kind.

    ``means``/``covariances`` are per class for ``two_gaussians``;
    ``radii`` and ``noise`` describe ``gaussian_ring_pair``; ``image_side``
    sets the glyph resolution; ``corpus_path``/``manifest`` locate an
    external PGM corpus.
    """

    kind: str
    seed: int = 0
    means: tuple[tuple[float, float], ...] = ((-2.0, 0.0), (2.0, 0.0))
    covariances: tuple[tuple[tuple[float, float], tuple[float, float]], ...] = (
        ((1.0, 0.0), (0.0, 1.0)),
        ((1.0, 0.0), (0.0, 1.0)),
    )
    radii: tuple[float, float] = (1.0, 3.0)
    noise: float = 0.2
    image_side: int = 8
    corpus_path: Optional[str] = None
    manifest: Optional[str] = None


def _two_gaussians(spec: DatasetSpec, n: int, rng) -> np.ndarray:
    if len(spec.means) != 2 or len(spec.covariances) != 2:
        raise InvalidSpec("two_gaussians needs two means and two covariances")
    parts = []
    for mu, cov in zip(spec.means, spec.covariances):
        cov = np.asarray(cov, dtype=np.float64)
        if cov.shape != (2, 2) or np.any(np.linalg.eigvalsh(cov) <= 0):
            raise InvalidSpec(f"covariance {cov.tolist()} is not positive definite")
        chol = np.linalg.cholesky(cov)
        parts.append(np.asarray(mu, dtype=np.float64) + rng.standard_normal((n, 2)) @ chol.T)
    return np.concatenate(parts)


def _rings(spec: DatasetSpec, n: int, rng) -> np.ndarray:
    parts = []
    for r in spec.radii:
        theta = rng.uniform(0.0, 2 * np.pi, n)
        rad = r + spec.noise * rng.standard_normal(n)
        parts.append(np.stack([rad * np.cos(theta), rad * np.sin(theta)], axis=1))
    return np.concatenate(parts)


def render_glyph(kind: int, side: int, cx: float, cy: float, size: float, supersample: int = 4) -> np.ndarray:
    """Anti-aliased filled disc (kind 0) or axis-aligned square (kind 1) in ``[0, 1]``."""
    offs = (np.arange(supersample) + 0.5) / supersample
    coords = (np.arange(side)[:, None] + offs[None, :]).reshape(-1)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    if kind == 0:
        inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= size ** 2
    else:
        inside = (np.abs(xx - cx) <= size) & (np.abs(yy - cy) <= size)
    return inside.reshape(side, supersample, side, supersample).mean(axis=(1, 3))


def _glyphs(spec: DatasetSpec, n: int, rng) -> np.ndarray:
    side = spec.image_side
    if side < 4:
        raise InvalidSpec("procedural_glyphs needs image_side >= 4")
    out = np.empty((2 * n, 1, side, side))
    for c in (0, 1):
        for i in range(n):
            cx, cy = side / 2 + rng.uniform(-side / 8, side / 8, 2)
            if c == 0:
                size = rng.uniform(0.22, 0.34) * side
            else:
                size = rng.uniform(0.18, 0.28) * side
            out[c * n + i, 0] = render_glyph(c, side, cx, cy, size)
    return out


def generate(spec: DatasetSpec, n_per_class: int) -> LabeledBatch:
    """Balanced batch: ``n_per_class`` samples of class 0 followed by class 1."""
    if n_per_class < 1:
        raise InvalidSpec("n_per_class must be at least 1")
    rng = make_rng(spec.seed)
    if spec.kind == "two_gaussians":
        samples = _two_gaussians(spec, n_per_class, rng)
    elif spec.kind == "gaussian_ring_pair":
        samples = _rings(spec, n_per_class, rng)
    elif spec.kind == "procedural_glyphs":
        samples = _glyphs(spec, n_per_class, rng)
    elif spec.kind == "external":
        raise InvalidSpec("external datasets are read with load_external")
    else:
        raise InvalidSpec(f"unknown dataset kind {spec.kind!r}")
    labels = np.repeat(np.array([0, 1], dtype=np.int64), n_per_class)
    return LabeledBatch(samples, labels)


# -- PGM -------------------------------------------------------------------

def _pgm_tokens(blob: bytes, count: int) -> tuple[list[bytes], int]:
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace() and blob[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise BadFormat("truncated PGM header")
        tokens.append(blob[start:pos])
    return tokens, pos


def decode_pgm(blob: bytes) -> np.ndarray:
    """Decode a binary (P5) PGM with maxval <= 255 into uint8 rows."""
    if not blob.startswith(b"P5"):
        raise BadFormat("not a binary PGM (P5) file")
    (magic, w, h, maxval), pos = _pgm_tokens(blob, 4)
    try:
        width, height, maxv = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise BadFormat("malformed PGM header") from exc
    if width <= 0 or height <= 0 or not 0 < maxv <= 255:
        raise BadFormat(f"unsupported PGM geometry {width}x{height} maxval {maxv}")
    pos += 1  # single whitespace byte after maxval
    payload = blob[pos:pos + width * height]
    if len(payload) != width * height:
        raise BadFormat("truncated PGM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(pixels: np.ndarray) -> bytes:
    """Encode ``[0, 1]`` floats (or uint8) as a binary PGM."""
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise BadFormat(f"PGM images are 2-D, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        arr = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = arr.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + arr.tobytes()


def read_pgm(path) -> np.ndarray:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return decode_pgm(blob)


def write_pgm(path, pixels: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(pixels))


def load_external(path, manifest="manifest.tsv") -> LabeledBatch:
    """Load a labelled PGM corpus.

    ``manifest`` (relative to ``path`` unless absolute) has one
    ``relative-path<TAB>label`` line per image. Pixels are scaled by 1/255.
    """
    root = Path(path)
    mpath = Path(manifest)
    if not mpath.is_absolute():
        mpath = root / mpath
    try:
        lines = mpath.read_text().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read manifest {mpath}: {exc}") from exc
    entries = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if not entries:
        raise BadLabel("manifest lists no samples, so there are no classes")
    images, labels = [], []
    for n, line in enumerate(entries, 1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise BadFormat(f"manifest line {n}: expected 'path<TAB>label'")
        rel, lab = parts[0], parts[1].strip()
        if lab not in ("0", "1"):
            raise BadLabel(f"manifest line {n}: label {lab!r} is not 0 or 1")
        img = read_pgm(root / rel)
        if images and img.shape != images[0].shape:
            raise BadFormat(f"{rel}: shape {img.shape} differs from {images[0].shape}")
        images.append(img)
        labels.append(int(lab))
    samples = np.stack(images).astype(np.float64)[:, None] / 255.0
    return LabeledBatch(samples, np.array(labels, dtype=np.int64))


def points_to_csv(batch: LabeledBatch) -> str:
    """Export a 2-D point dataset as ``x,y,label`` CSV."""
    if batch.samples.ndim != 2 or batch.samples.shape[1] != 2:
        raise InvalidSpec("only 2-D point datasets can be exported as CSV")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "label"])
    for (x, y), lab in zip(batch.samples, batch.labels):
        w.writerow([repr(float(x)), repr(float(y)), int(lab)])
    return buf.getvalue()


def mosaic(images: np.ndarray, columns: int, pad: int = 1) -> np.ndarray:
    """Tile ``(n, 1, h, w)`` or ``(n, h, w)`` images into one grid image."""
    imgs = np.asarray(images, dtype=np.float64)
    if imgs.ndim == 4:
        imgs = imgs[:, 0]
    n, h, w = imgs.shape
    rows = -(-n // columns)
    out = np.zeros((rows * (h + pad) + pad, columns * (w + pad) + pad))
    for i, img in enumerate(np.clip(imgs, 0.0, 1.0)):
        r, c = divmod(i, columns)
        out[pad + r * (h + pad):pad + r * (h + pad) + h, pad + c * (w + pad):pad + c * (w + pad) + w] = img
    return out
