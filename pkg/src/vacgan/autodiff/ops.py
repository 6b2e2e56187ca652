"""Differentiable primitives.

Shape rules (no implicit broadcasting):

* ``add``/``sub``/``mul``: operands of identical shape.
* ``matmul``: ``(n, k) @ (k, m) -> (n, m)``.
* ``affine``: ``x (n, i)``, ``w (i, o)``, ``b (o,)`` -> ``(n, o)``.
* ``conv2d``: ``x (n, c, h, w)``, ``w (o, c, k, k)``, optional ``b (o,)``;
  stride 1 or 2, padding ``"same"`` (output side ``ceil(h / stride)``) or
  ``"valid"`` (output side ``(h - k) // stride + 1``).
* ``maxpool2x2``/``unpool2x2``: ``(n, c, h, w)`` with even ``h, w`` for pooling.
* ``mean``/``sum``: full reduction to shape ``()``.
* ``concat``: equal shapes except along ``axis``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from vacgan.autodiff.tensor import Tensor, emit
from vacgan.errors import ShapeMismatch

ELU_ALPHA = 1.0


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _same_shape(op, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape("add", a, b)
    return emit("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape("sub", a, b)
    return emit("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape("mul", a, b)
    x, y = a.data, b.data
    return emit("mul", (a, b), x * y, lambda g: (g * y, g * x))


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a constant (non-differentiable) factor."""
    factor = float(factor)
    return emit("scale", (a,), a.data * factor, lambda g: (g * factor,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: cannot multiply {a.shape} by {b.shape}")
    x, y = a.data, b.data
    return emit("matmul", (a, b), x @ y, lambda g: (g @ y.T, x.T @ g))


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeMismatch(f"affine: x {x.shape}, w {w.shape}, b {b.shape}")
    xd, wd = x.data, w.data
    return emit(
        "affine",
        (x, w, b),
        xd @ wd + b.data,
        lambda g: (g @ wd.T, xd.T @ g, g.sum(axis=0)),
    )


def _same_padding(size: int, k: int, stride: int) -> tuple[int, int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return out, total // 2, total - total // 2


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: str = "same") -> Tensor:
    if x.ndim != 4 or w.ndim != 4 or w.shape[1] != x.shape[1] or w.shape[2] != w.shape[3]:
        raise ShapeMismatch(f"conv2d: x {x.shape}, w {w.shape}")
    if b is not None and b.shape != (w.shape[0],):
        raise ShapeMismatch(f"conv2d: bias {b.shape} for {w.shape[0]} filters")
    if stride not in (1, 2):
        raise ShapeMismatch(f"conv2d: unsupported stride {stride}")
    n, c, h, wd = x.shape
    k = w.shape[2]
    if padding == "same":
        oh, pt, pb = _same_padding(h, k, stride)
        ow, pl, pr = _same_padding(wd, k, stride)
    elif padding == "valid":
        if h < k or wd < k:
            raise ShapeMismatch(f"conv2d: kernel {k} larger than input {h}x{wd}")
        oh, ow = (h - k) // stride + 1, (wd - k) // stride + 1
        pt = pb = pl = pr = 0
    else:
        raise ShapeMismatch(f"conv2d: unknown padding {padding!r}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    # (n, c, oh, ow, k, k) view of every receptive field
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    kern = w.data
    out = np.tensordot(win, kern, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b.data[None, :, None, None]

    def rule(g):
        dw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))
        dxp = np.zeros_like(xp)
        span_h = stride * (oh - 1) + 1
        span_w = stride * (ow - 1) + 1
        for i in range(k):
            for j in range(k):
                contrib = np.tensordot(g, kern[:, :, i, j], axes=([1], [0]))
                dxp[:, :, i:i + span_h:stride, j:j + span_w:stride] += contrib.transpose(0, 3, 1, 2)
        dx = dxp[:, :, pt:pt + h, pl:pl + wd]
        if b is None:
            return dx, dw
        return dx, dw, g.sum(axis=(0, 2, 3))

    inputs = (x, w) if b is None else (x, w, b)
    return emit("conv2d", inputs, out, rule)


def maxpool2x2(x: Tensor) -> Tensor:
    if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeMismatch(f"maxpool2x2: needs (n, c, even, even), got {x.shape}")
    n, c, h, w = x.shape
    blocks = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def rule(g):
        gb = np.zeros((n, c, h // 2, w // 2, 4))
        np.put_along_axis(gb, idx[..., None], g[..., None], axis=-1)
        return (gb.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w),)

    return emit("maxpool2x2", (x,), out, rule)


def unpool2x2(x: Tensor) -> Tensor:
    """Nearest-neighbour upsampling by 2 along both spatial axes."""
    if x.ndim != 4:
        raise ShapeMismatch(f"unpool2x2: needs (n, c, h, w), got {x.shape}")
    n, c, h, w = x.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)
    return emit("unpool2x2", (x,), out, lambda g: (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return emit("relu", (x,), np.where(mask, x.data, 0.0), lambda g: (g * mask,))


def elu(x: Tensor) -> Tensor:
    xd = x.data
    neg = np.expm1(np.minimum(xd, 0.0)) * ELU_ALPHA
    out = np.where(xd > 0, xd, neg)
    return emit("elu", (x,), out, lambda g: (g * np.where(xd > 0, 1.0, neg + ELU_ALPHA),))


def sigmoid(x: Tensor) -> Tensor:
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return emit("sigmoid", (x,), s, lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return emit("tanh", (x,), t, lambda g: (g * (1.0 - t * t),))


def abs(x: Tensor) -> Tensor:  # noqa: A001 - mirrors the primitive's name
    xd = x.data
    return emit("abs", (x,), np.abs(xd), lambda g: (g * np.sign(xd),))


def square(x: Tensor) -> Tensor:
    xd = x.data
    return emit("square", (x,), xd * xd, lambda g: (2.0 * g * xd,))


def log(x: Tensor) -> Tensor:
    xd = x.data
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(xd)
    return emit("log", (x,), out, lambda g: (g / xd,))


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp into ``[lo, hi]``; the gradient is zero where clamping bites."""
    xd = x.data
    inside = (xd >= lo) & (xd <= hi)
    return emit("clip", (x,), np.clip(xd, lo, hi), lambda g: (g * inside,))


def mean(x: Tensor) -> Tensor:
    shape, n = x.shape, x.size
    return emit("mean", (x,), np.asarray(x.data.mean()), lambda g: (np.full(shape, float(g) / n),))


def sum(x: Tensor) -> Tensor:  # noqa: A001
    shape = x.shape
    return emit("sum", (x,), np.asarray(x.data.sum()), lambda g: (np.full(shape, float(g)),))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    old = x.shape
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeMismatch(f"reshape: {old} -> {tuple(shape)}") from exc
    return emit("reshape", (x,), out, lambda g: (g.reshape(old),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeMismatch("concat: no inputs")
    ndim = tensors[0].ndim
    ax = axis % ndim if ndim else 0
    for t in tensors[1:]:
        if t.ndim != ndim or any(s != r for d, (s, r) in enumerate(zip(t.shape, tensors[0].shape)) if d != ax):
            raise ShapeMismatch(f"concat: incompatible shapes {[t.shape for t in tensors]}")
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=ax)
    return emit("concat", tuple(tensors), out, lambda g: tuple(np.split(g, bounds, axis=ax)))


PRIMITIVES = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "matmul": matmul,
    "conv2d": conv2d,
    "maxpool2x2": maxpool2x2,
    "unpool2x2": unpool2x2,
    "affine": affine,
    "relu": relu,
    "elu": elu,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "mean": mean,
    "sum": sum,
    "abs": abs,
    "square": square,
    "concat": concat,
}


def forward_primitive(op: str, *inputs, **kwargs) -> Tensor:
    """Dispatch a primitive by name, e.g. ``forward_primitive("relu", x)``."""
    try:
        fn = PRIMITIVES[op]
    except KeyError:
        raise ValueError(f"unknown primitive {op!r}") from None
    if op == "concat":
        return fn(list(inputs), **kwargs)
    return fn(*inputs, **kwargs)
