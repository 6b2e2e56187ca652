"""Generator, discriminator and classifier builders.

Image roles use NCHW tensors with one grayscale channel. Point roles use
``(n, features)`` tensors. Every model is a flat sequence of layers whose
parameters live in ``Model.params`` under names like ``"dense0.w"``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from vacgan.autodiff import ops
from vacgan.autodiff.io import load_tensor, save_tensor
from vacgan.autodiff.tensor import Tape, Tensor
from vacgan.errors import BadFormat, InvalidConfig, ShapeMismatch

ROLES = ("generator", "discriminator_scalar", "discriminator_autoencoder", "classifier_mlp", "classifier_conv")
ACTIVATIONS = {"relu": ops.relu, "elu": ops.elu, "sigmoid": ops.sigmoid, "tanh": ops.tanh, None: None}
_ACT_LABEL = {"relu": "ReLU", "elu": "ELU", "sigmoid": "Sigmoid", "tanh": "Tanh", None: "linear"}


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description for one network.

    ``widths`` lists layer sizes for point (MLP) models, input and output
    included. For image models ``channels`` are per-stage conv channel counts,
    ``image_side`` the square image side and ``dense`` the width of the
    fully connected layer (classifier hidden layer, autoencoder bottleneck).
    ``latent_dim`` is the generator input size.
    """

    role: str
    widths: tuple[int, ...] = ()
    channels: tuple[int, ...] = (8,)
    latent_dim: int = 8
    image_side: Optional[int] = None
    dense: int = 16
    activation: Optional[str] = None

    def validate(self) -> None:
        if self.role not in ROLES:
            raise InvalidConfig(f"unknown role {self.role!r}")
        if self.activation not in ACTIVATIONS:
            raise InvalidConfig(f"unknown activation {self.activation!r}")
        if any(int(v) <= 0 for v in (*self.widths, *self.channels, self.latent_dim, self.dense)):
            raise InvalidConfig("widths, channels, latent_dim and dense must be positive")
        if self.role == "classifier_conv" and self.image_side is None:
            raise InvalidConfig("classifier_conv needs image_side")
        if self.image_side is None:
            if len(self.widths) < 2:
                raise InvalidConfig(f"{self.role} without image_side needs at least two widths")
            return
        if self.image_side <= 0:
            raise InvalidConfig("image_side must be positive")
        if not self.channels:
            raise InvalidConfig("image models need at least one channel entry")
        factor = 4 if self.role == "classifier_conv" else 2 ** (len(self.channels) - 1)
        if self.image_side % factor:
            raise InvalidConfig(f"image_side {self.image_side} is not divisible by {factor} for {self.role}")


class Layer:
    kind = "layer"

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        return {}

    def __call__(self, params: dict[str, Tensor], x: Tensor) -> Tensor:
        raise NotImplementedError

    def describe(self) -> str:
        return self.kind


@dataclass
class Dense(Layer):
    name: str
    n_in: int
    n_out: int
    act: Optional[str] = None
    kind = "dense"

    def param_shapes(self):
        return {f"{self.name}.w": (self.n_in, self.n_out), f"{self.name}.b": (self.n_out,)}

    def __call__(self, params, x):
        y = ops.affine(x, params[f"{self.name}.w"], params[f"{self.name}.b"])
        return ACTIVATIONS[self.act](y) if self.act else y

    def describe(self):
        return f"Dense({self.n_out})/{_ACT_LABEL[self.act]}"


@dataclass
class Conv(Layer):
    name: str
    c_in: int
    c_out: int
    k: int = 3
    stride: int = 1
    act: Optional[str] = None
    kind = "conv"

    def param_shapes(self):
        return {f"{self.name}.w": (self.c_out, self.c_in, self.k, self.k), f"{self.name}.b": (self.c_out,)}

    def __call__(self, params, x):
        y = ops.conv2d(x, params[f"{self.name}.w"], params[f"{self.name}.b"], stride=self.stride, padding="same")
        return ACTIVATIONS[self.act](y) if self.act else y

    def describe(self):
        stride = f"/s{self.stride}" if self.stride != 1 else ""
        return f"Conv{self.k}x{self.k}({self.c_out}){stride}/{_ACT_LABEL[self.act]}"


@dataclass
class MaxPool(Layer):
    kind = "maxpool"

    def __call__(self, params, x):
        return ops.maxpool2x2(x)

    def describe(self):
        return "MaxPool2x2"


@dataclass
class Unpool(Layer):
    kind = "unpool"

    def __call__(self, params, x):
        return ops.unpool2x2(x)

    def describe(self):
        return "Unpool2x2"


@dataclass
class Reshape(Layer):
    shape: tuple[int, ...]
    kind = "reshape"

    def __call__(self, params, x):
        return ops.reshape(x, (x.shape[0], *self.shape))

    def describe(self):
        return "Reshape(" + "x".join(map(str, self.shape)) + ")"


@dataclass
class Model:
    config: ModelConfig
    layers: list[Layer]
    params: dict[str, Tensor]
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]

    def __call__(self, x: Tensor) -> Tensor:
        return forward(self, x)

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def describe(self) -> list[str]:
        return [layer.describe() for layer in self.layers if not isinstance(layer, Reshape)]

    def set_params(self, new: dict[str, Tensor]) -> None:
        """Replace parameter values, keeping them as gradient leaves."""
        for name, value in new.items():
            if name not in self.params:
                raise KeyError(name)
            if value.shape != self.params[name].shape:
                raise ShapeMismatch(f"{name}: {value.shape} != {self.params[name].shape}")
            self.params[name] = Tensor(value.data, requires_grad=True, name=name)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}


def _mlp(widths, hidden_act, out_act, prefix="dense") -> list[Layer]:
    layers = []
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        last = i == len(widths) - 2
        layers.append(Dense(f"{prefix}{i}", a, b, out_act if last else hidden_act))
    return layers


def _decoder(n_in: int, channels, side: int, dense_act=None, prefix="dec") -> tuple[list[Layer], int]:
    # fc -> (c, s0, s0), then [conv, conv, unpool] per upsampling stage, then conv, conv, conv(1)
    n_up = len(channels) - 1
    s0 = side // 2 ** n_up
    c0 = channels[0]
    layers: list[Layer] = [Dense(f"{prefix}_fc", n_in, c0 * s0 * s0, dense_act), Reshape((c0, s0, s0))]
    c_prev, idx = c0, 0
    for stage, c in enumerate(channels):
        for _ in range(2):
            layers.append(Conv(f"{prefix}_conv{idx}", c_prev, c, act="elu"))
            c_prev, idx = c, idx + 1
        if stage < n_up:
            layers.append(Unpool())
    layers.append(Conv(f"{prefix}_conv{idx}", c_prev, 1, act=None))
    return layers, s0


def _encoder(channels, side: int, n_out: int, prefix="enc") -> list[Layer]:
    # conv, then per stage: conv, conv(stride 2 between stages); bottleneck fc, no activation
    layers: list[Layer] = [Conv(f"{prefix}_conv0", 1, channels[0], act="elu")]
    c_prev, idx, s = channels[0], 1, side
    for stage, c in enumerate(channels):
        last = stage == len(channels) - 1
        layers.append(Conv(f"{prefix}_conv{idx}", c_prev, c, act="elu"))
        c_prev, idx = c, idx + 1
        layers.append(Conv(f"{prefix}_conv{idx}", c_prev, c, stride=1 if last else 2, act="elu"))
        idx += 1
        if not last:
            s //= 2
    layers.append(Reshape((c_prev * s * s,)))
    layers.append(Dense(f"{prefix}_fc", c_prev * s * s, n_out, None))
    return layers


def _layers_for(config: ModelConfig) -> tuple[list[Layer], tuple[int, ...], tuple[int, ...]]:
    role, side = config.role, config.image_side
    if side is None:
        w = tuple(int(v) for v in config.widths)
        if role == "generator":
            return _mlp(w, config.activation or "elu", None), (w[0],), (w[-1],)
        if role == "discriminator_scalar":
            return _mlp(w, config.activation or "elu", "sigmoid"), (w[0],), (w[-1],)
        if role == "discriminator_autoencoder":
            # widths describe the encoder down to the bottleneck; decoder mirrors it
            enc = _mlp(w, config.activation or "elu", None, prefix="enc")
            dec = _mlp(w[::-1], config.activation or "elu", None, prefix="dec")
            return enc + dec, (w[0],), (w[0],)
        if role == "classifier_mlp":
            return _mlp(w, config.activation or "relu", "sigmoid"), (w[0],), (w[-1],)
    image = (1, side, side)
    ch = tuple(int(c) for c in config.channels)
    if role == "generator":
        layers, _ = _decoder(config.latent_dim, ch, side, prefix="gen")
        return layers, (config.latent_dim,), image
    if role == "discriminator_autoencoder":
        enc = _encoder(ch, side, config.dense)
        dec, _ = _decoder(config.dense, ch, side)
        return enc + dec, image, image
    if role == "discriminator_scalar":
        flat = side * side
        return [Reshape((flat,))] + _mlp((flat, config.dense, 1), config.activation or "elu", "sigmoid"), image, (1,)
    if role == "classifier_conv":
        c1, c2 = (ch + ch)[:2] if len(ch) == 1 else ch[:2]
        quarter = side // 4
        layers = [
            Conv("conv0", 1, c1, act="relu"),
            MaxPool(),
            Conv("conv1", c1, c2, act="relu"),
            MaxPool(),
            Reshape((c2 * quarter * quarter,)),
            Dense("dense0", c2 * quarter * quarter, config.dense, "relu"),
            Dense("dense1", config.dense, 1, "sigmoid"),
        ]
        return layers, image, (1,)
    raise InvalidConfig(f"role {role!r} is not available for this input kind")


def reference_classifier(image_side: int = 48) -> ModelConfig:
    """Conv3x3(16)-pool-Conv3x3(8)-pool-Dense(1024)-Dense(1) classifier."""
    return ModelConfig("classifier_conv", channels=(16, 8), image_side=image_side, dense=1024)


def build(config: ModelConfig, rng: np.random.Generator) -> Model:
    """Build a model with Glorot-uniform weights and zero biases."""
    config.validate()
    layers, in_shape, out_shape = _layers_for(config)
    params: dict[str, Tensor] = {}
    for layer in layers:
        for name, shape in layer.param_shapes().items():
            if name.endswith(".b"):
                value = np.zeros(shape)
            else:
                if len(shape) == 4:
                    fan_in, fan_out = shape[1] * shape[2] * shape[3], shape[0] * shape[2] * shape[3]
                else:
                    fan_in, fan_out = shape
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                value = rng.uniform(-limit, limit, size=shape)
            params[name] = Tensor(value, requires_grad=True, name=name)
    return Model(config, layers, params, tuple(in_shape), tuple(out_shape))


def forward(model: Model, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """Apply ``model`` to a batch ``x`` of shape ``(n, *input_shape)``.

    When ``tape`` is given the computation is recorded on it; otherwise it is
    recorded on whatever tape is active (if any).
    """
    if not isinstance(x, Tensor):
        x = Tensor(x)
    if x.shape[1:] != model.input_shape:
        raise ShapeMismatch(f"expected input (n, {model.input_shape}), got {x.shape}")
    if tape is not None:
        with tape:
            return forward(model, x)
    h = x
    for layer in model.layers:
        h = layer(model.params, h)
    return h


def with_input_dim(config: ModelConfig, n_in: int) -> ModelConfig:
    """Same architecture with a different input size (e.g. for label concatenation)."""
    if config.image_side is not None and config.role == "generator":
        return replace(config, latent_dim=n_in)
    return replace(config, widths=(n_in, *config.widths[1:]))


def save_model(model: Model, directory) -> None:
    """Write each parameter as a VTNS file plus a ``manifest.txt`` (name, tab, file)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = []
    for name in sorted(model.params):
        fname = name.replace("/", "_") + ".vtns"
        save_tensor(model.params[name], d / fname)
        lines.append(f"{name}\t{fname}")
    (d / "manifest.txt").write_text("\n".join(lines) + "\n")


def load_model(model: Model, directory) -> Model:
    """Load parameters saved by :func:`save_model` into a freshly built ``model``."""
    d = Path(directory)
    manifest = d / "manifest.txt"
    if not manifest.exists():
        raise BadFormat(f"missing {manifest}")
    loaded = {}
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        name, fname = line.split("\t")
        loaded[name] = load_tensor(d / fname)
    if set(loaded) != set(model.params):
        raise BadFormat(f"checkpoint parameters {sorted(set(loaded) ^ set(model.params))} do not match the model")
    try:
        model.set_params(loaded)
    except ShapeMismatch as exc:
        raise BadFormat(str(exc)) from exc
    return model
