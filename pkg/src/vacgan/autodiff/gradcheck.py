"""Compare tape gradients against central finite differences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from vacgan.autodiff.tensor import Tape, Tensor, backward
from vacgan.errors import NonFinite

ABS_FLOOR = 1e-8


@dataclass(frozen=True)
class GradCheckResult:
    passed: bool
    max_rel_error: float
    analytic: tuple[np.ndarray, ...]
    numeric: tuple[np.ndarray, ...]

    def __bool__(self):
        return self.passed


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = ABS_FLOOR) -> np.ndarray:
    """Element-wise ``|a - n| / max(|a|, |n|, floor)``."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(
    f: Callable[..., Tensor],
    point: Union[Tensor, np.ndarray, Sequence],
    step: float = 1e-3,
    tol: float = 1e-4,
) -> GradCheckResult:
    """Check ``f``'s backward rules at ``point``.

    ``point`` may be a single tensor/array or a list of them, in which case
    ``f`` receives one positional argument per entry. ``f`` must return a
    one-element tensor.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    multi = isinstance(point, (list, tuple))
    arrays = [np.array(p.data if isinstance(p, Tensor) else p, dtype=np.float64) for p in (point if multi else [point])]

    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        out = f(*leaves)
    grads = backward(tape, out)
    analytic = tuple(grads[leaf].data if leaf in grads else np.zeros_like(leaf.data) for leaf in leaves)

    def evaluate(values):
        val = f(*[Tensor(v) for v in values]).item()
        if not np.isfinite(val):
            raise NonFinite("function value is not finite")
        return val

    numeric = []
    for i, base in enumerate(arrays):
        num = np.zeros_like(base)
        flat = num.reshape(-1)
        for j in range(base.size):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[i].reshape(-1)[j] += step
            minus[i].reshape(-1)[j] -= step
            flat[j] = (evaluate(plus) - evaluate(minus)) / (2.0 * step)
        numeric.append(num)

    errs = [relative_error(a, n) for a, n in zip(analytic, numeric)]
    worst = max((float(e.max()) for e in errs if e.size), default=0.0)
    return GradCheckResult(worst <= tol, worst, analytic, tuple(numeric))
