"""A short walk through the tape-based autodiff engine.

Run with ``python3 demos/01_autodiff_tour.py``. Nothing is written to disk.
"""

# %%
# Tensors are immutable float64 arrays. Only leaves created with
# requires_grad=True receive gradients, and only operations performed inside
# a Tape context are recorded.
import numpy as np

from vacgan.autodiff import Tape, Tensor, backward, grad_check, make_rng, ops

x = Tensor(np.array([0.5, -1.0, 2.0]), requires_grad=True)
with Tape() as tape:
    y = ops.sum(ops.mul(ops.sigmoid(x), x))
grads = backward(tape, y)
print("y =", y.item())
print("dy/dx =", grads[x].numpy())

# %%
# The analytic gradient of sum(x * sigmoid(x)) is s + x s (1 - s). Checking
# the engine against the closed form is a one-liner.
s = 1.0 / (1.0 + np.exp(-x.numpy()))
print("closed form matches:", np.allclose(grads[x].numpy(), s + x.numpy() * s * (1 - s), atol=1e-14))

# %%
# grad_check compares every gradient entry against central differences.
# A convolution followed by max-pooling is a good stress test because both
# backward rules route gradients through index bookkeeping.
rng = make_rng(0)
r = Tensor(rng.standard_normal((2, 3, 3, 3)))


def conv_pool(img, kernel):
    return ops.sum(ops.mul(ops.maxpool2x2(ops.conv2d(img, kernel)), r))


result = grad_check(conv_pool, [rng.standard_normal((2, 1, 6, 6)), rng.standard_normal((3, 1, 3, 3))])
print(f"conv2d + maxpool: passed={result.passed}, worst relative error {result.max_rel_error:.2e}")

# %%
# The same machinery runs the full battery used by the test suite: every
# primitive and every training loss, over several seeds.
from vacgan.experiments import gradient_suite

suite = gradient_suite(range(3))
worst = max(suite, key=lambda item: item[2].max_rel_error)
print(f"{len(suite)} checks, all passed: {all(r.passed for _, _, r in suite)}")
print(f"hardest case: seed {worst[0]}, {worst[1]}, relative error {worst[2].max_rel_error:.2e}")
