"""Immutable tensors and the tape that records operations on them."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from vacgan.errors import DetachedOutput, NonFinite, NotScalar

_local = threading.local()


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64-backed generator.

    PCG64 is fully specified and produces the same stream on every platform
    for a given seed, which is what all reproducibility guarantees rest on.
    """
    return np.random.Generator(np.random.PCG64(seed))


def child_seeds(seed: int, n: int) -> list[int]:
    """Derive ``n`` independent 63-bit seeds from one master seed."""
    states = np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)
    return [int(s >> np.uint64(1)) for s in states]


class Tensor:
    """Dense float64 array, read-only once constructed.

    Tensors created with ``requires_grad=True`` act as leaves: ``backward``
    returns a gradient for each of them that took part in the recorded
    computation.
    """

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFinite("tensor values must be finite")
        arr.setflags(write=False)
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # Adopt an array produced internally without copying it.
        t = cls.__new__(cls)
        if arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        arr.setflags(write=False)
        t.data = arr
        t.requires_grad = False
        t.name = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise NotScalar(f"tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data)

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{tag}{grad})"

    # Operator sugar; the real definitions live in ops.
    def __add__(self, other):
        from vacgan.autodiff import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from vacgan.autodiff import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from vacgan.autodiff import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        from vacgan.autodiff import ops
        return ops.matmul(self, other)

    def __neg__(self):
        from vacgan.autodiff import ops
        return ops.scale(self, -1.0)


BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    rule: BackwardRule


@dataclass
class Tape:
    """Ordered record of executed primitives.

    Use as a context manager; primitives executed inside the ``with`` block
    are recorded when at least one of their inputs is a leaf or an earlier
    recorded output. A tape belongs to one thread and one training step.
    """

    nodes: list[Node] = field(default_factory=list)
    _leaves: dict[int, Tensor] = field(default_factory=dict, repr=False)
    _tracked: dict[int, int] = field(default_factory=dict, repr=False)

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        stack = _stack()
        if not stack or stack[-1] is not self:
            raise RuntimeError("tape stack corrupted")
        stack.pop()
        return False

    @property
    def leaves(self) -> list[Tensor]:
        return list(self._leaves.values())

    def clear(self) -> None:
        self.nodes.clear()
        self._leaves.clear()
        self._tracked.clear()

    def watch(self, tensor: Tensor) -> None:
        """Register ``tensor`` as a leaf even if no recorded op consumes it."""
        if not tensor.requires_grad:
            raise ValueError("only tensors with requires_grad=True can be leaves")
        self._leaves.setdefault(id(tensor), tensor)

    def _wants(self, inputs: Sequence[Tensor]) -> bool:
        return any(t.requires_grad or id(t) in self._tracked for t in inputs)

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, rule: BackwardRule) -> None:
        for t in inputs:
            if t.requires_grad and id(t) not in self._tracked:
                self._leaves.setdefault(id(t), t)
        self._tracked[id(output)] = len(self.nodes)
        self.nodes.append(Node(op, tuple(inputs), output, rule))


def _stack() -> list[Tape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> Optional[Tape]:
    stack = _stack()
    return stack[-1] if stack else None


def emit(op: str, inputs: Sequence[Tensor], out: np.ndarray, rule: BackwardRule) -> Tensor:
    """Wrap a primitive's result, check it, and record it on the active tape."""
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"{op} produced non-finite values")
    result = Tensor._wrap(out)
    tape = active_tape()
    if tape is not None and tape._wants(inputs):
        tape.record(op, inputs, result, rule)
    return result


def backward(tape: Tape, output: Tensor) -> dict[Tensor, Tensor]:
    """Gradient of the scalar ``output`` with respect to every leaf on ``tape``.

    Gradients flowing into a tensor from several consumers are summed. Leaves
    that the output does not depend on get a zero gradient.
    """
    if output.size != 1:
        raise NotScalar(f"backward needs a one-element output, got shape {output.shape}")
    idx = tape._tracked.get(id(output))
    if idx is None or tape.nodes[idx].output is not output:
        raise DetachedOutput("output was not produced on this tape")

    grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
    for node in reversed(tape.nodes[: idx + 1]):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.rule(g)):
            if gi is None:
                continue
            key = id(inp)
            if not (inp.requires_grad or key in tape._tracked):
                continue
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
    return {
        leaf: Tensor._wrap(np.asarray(grads.get(key, np.zeros_like(leaf.data)), dtype=np.float64).reshape(leaf.shape))
        for key, leaf in tape._leaves.items()
    }
