"""Step functions and the interleaved D / C / G training loop.

Supported schemes:

``gan``
    Sigmoid discriminator, BCE adversarial losses.
``began`` / ``cbegan``
    Autoencoder discriminator with ``L_d = L(x) - k_t L(G(z))`` and
    ``L_g = L(G(z))``. ``cbegan`` feeds the class to the generator.
``vacgan_on_gan`` / ``vacgan_on_began``
    The base scheme plus a classifier ``C`` on generated samples; the
    generator minimises ``vartheta * L_g + zeta * BCE(C(G(z)), c)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from vacgan.autodiff.tensor import Tape, Tensor, backward, child_seeds, make_rng
from vacgan.errors import InvalidConfig, StepError
from vacgan.latent import LatentSpec, label_concat, sample, sample_balanced
from vacgan.models import Model, ModelConfig, build, forward, with_input_dim
from vacgan.training.losses import (
    BeganState,
    VacGanWeights,
    autoencoder_loss,
    bce,
    began_discriminator_loss,
    began_k_update,
    convergence_measure,
    gan_discriminator_loss,
    gan_generator_loss,
    vacgan_generator_loss,
)
from vacgan.training.optim import OptimizerState

SCHEMES = ("gan", "began", "cbegan", "vacgan_on_gan", "vacgan_on_began")
BEGAN_FAMILY = ("began", "cbegan", "vacgan_on_began")
CONDITIONAL = ("cbegan", "vacgan_on_gan", "vacgan_on_began")
CONDITIONING_MODES = ("latent_partition", "label_concat")
GAN_LOSSES = ("non_saturating", "minimax")


@dataclass(frozen=True)
class OptimizerSettings:
    kind: str = "adam"
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    momentum: float = 0.9

    def create(self) -> OptimizerState:
        return OptimizerState(self.kind, self.learning_rate, self.beta1, self.beta2, self.momentum)


@dataclass(frozen=True)
class TrainConfig:
    scheme: str
    generator: ModelConfig
    discriminator: ModelConfig
    classifier: Optional[ModelConfig] = None
    conditioning_mode: str = "latent_partition"
    latent_dim: int = 4
    batch_size: int = 32
    steps: int = 1000
    seed: int = 0
    weights: VacGanWeights = VacGanWeights()
    began: BeganState = BeganState()
    optim_gd: OptimizerSettings = OptimizerSettings()
    optim_c: OptimizerSettings = OptimizerSettings("nesterov_momentum", 0.01, momentum=0.9)
    gan_loss: str = "non_saturating"
    classifier_steps: int = 1
    classifier_real_data: bool = False

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise InvalidConfig(f"unknown scheme {self.scheme!r}")
        if self.conditioning_mode not in CONDITIONING_MODES:
            raise InvalidConfig(f"unknown conditioning_mode {self.conditioning_mode!r}")
        if self.gan_loss not in GAN_LOSSES:
            raise InvalidConfig(f"unknown gan_loss {self.gan_loss!r}")
        if self.scheme.startswith("vacgan") and self.classifier is None:
            raise InvalidConfig(f"scheme {self.scheme} needs a classifier config")
        if self.batch_size < 2 or self.steps < 0 or self.latent_dim < 1 or self.classifier_steps < 1:
            raise InvalidConfig("batch_size >= 2, steps >= 0, latent_dim >= 1 and classifier_steps >= 1 required")
        want_d = "discriminator_autoencoder" if self.scheme in BEGAN_FAMILY else "discriminator_scalar"
        if self.discriminator.role != want_d:
            raise InvalidConfig(f"scheme {self.scheme} needs a {want_d} discriminator")
        if self.generator.role != "generator":
            raise InvalidConfig("generator config must have role 'generator'")

    @property
    def uses_classifier(self) -> bool:
        return self.scheme.startswith("vacgan")

    @property
    def generator_input_dim(self) -> int:
        concat = self.scheme in CONDITIONAL and self.conditioning_mode == "label_concat"
        return self.latent_dim + (2 if concat else 0)


@dataclass
class Networks:
    generator: Model
    discriminator: Model
    classifier: Optional[Model] = None


@dataclass
class TrainState:
    """Mutable per-run optimisation state shared by the step functions."""

    began: BeganState = BeganState()
    opt_d: OptimizerState = field(default_factory=OptimizerState)
    opt_g: OptimizerState = field(default_factory=OptimizerState)
    opt_c: Optional[OptimizerState] = None
    gan_loss: str = "non_saturating"
    loss_real: float = float("nan")
    loss_fake: float = float("nan")


@dataclass(frozen=True)
class StepRecord:
    step: int
    loss_d: float
    loss_g: float
    loss_c: Optional[float]
    k_t: Optional[float]
    M: Optional[float]


@dataclass
class TrainedBundle:
    config: TrainConfig
    networks: Networks
    history: list[StepRecord]

    @property
    def k_trace(self) -> list[float]:
        return [r.k_t for r in self.history if r.k_t is not None]

    def history_csv(self) -> str:
        return history_to_csv(self.history)


def history_to_csv(history: list[StepRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "loss_d", "loss_g", "loss_c", "k_t", "M"])
    for r in history:
        w.writerow([r.step, *("" if v is None else repr(float(v)) for v in (r.loss_d, r.loss_g, r.loss_c, r.k_t, r.M))])
    return buf.getvalue()


def generator_input(config: TrainConfig, z: Tensor, labels: np.ndarray) -> Tensor:
    if config.generator_input_dim != config.latent_dim:
        return label_concat(z, labels)
    return z


def build_networks(config: TrainConfig) -> Networks:
    """Build G, D and (if needed) C from independent child seeds of ``config.seed``."""
    config.validate()
    s = child_seeds(config.seed, 8)
    g = build(with_input_dim(config.generator, config.generator_input_dim), make_rng(s[0]))
    d = build(config.discriminator, make_rng(s[1]))
    c = build(config.classifier, make_rng(s[2])) if config.uses_classifier else None
    if d.input_shape != g.output_shape:
        raise InvalidConfig(f"discriminator input {d.input_shape} != generator output {g.output_shape}")
    if c is not None and c.input_shape != g.output_shape:
        raise InvalidConfig(f"classifier input {c.input_shape} != generator output {g.output_shape}")
    return Networks(g, d, c)


def _labels_col(labels: np.ndarray) -> np.ndarray:
    return np.asarray(labels, dtype=np.float64).reshape(-1, 1)


def _apply(model: Model, opt: OptimizerState, tape: Tape, loss: Tensor) -> None:
    grads = backward(tape, loss)
    opt.step(model, {p: grads[p] for p in model.params.values() if p in grads})


def discriminator_loss(scheme: str, nets: Networks, batch_real: Tensor, fake: Tensor, state: TrainState):
    """Return ``(L_d, L(x), L(G(z)))``; the last two are ``None`` for ``gan`` schemes."""
    d = nets.discriminator
    if scheme in BEGAN_FAMILY:
        l_real = autoencoder_loss(batch_real, forward(d, batch_real))
        l_fake = autoencoder_loss(fake, forward(d, fake))
        return began_discriminator_loss(l_real, l_fake, state.began.k_t), l_real, l_fake
    return gan_discriminator_loss(forward(d, batch_real), forward(d, fake)), None, None


def step_discriminator(scheme: str, nets: Networks, batch_real: Tensor, batch_z: Tensor, state: TrainState):
    """One optimiser step on D. Returns ``(loss_d, state)``.

    For BEGAN-family schemes ``state.began`` is advanced with the equilibrium
    update computed from this step's losses.
    """
    fake = forward(nets.generator, batch_z)  # constant: no tape active
    with Tape() as tape:
        loss, l_real, l_fake = discriminator_loss(scheme, nets, batch_real, fake, state)
    _apply(nets.discriminator, state.opt_d, tape, loss)
    if l_real is not None:
        state.loss_real, state.loss_fake = l_real.item(), l_fake.item()
        state.began = began_k_update(state.began, state.loss_real, state.loss_fake)
    return loss.item(), state


def generator_loss(scheme: str, nets: Networks, batch_z: Tensor, labels, weights: VacGanWeights, gan_loss="non_saturating"):
    """Return ``(L_g, base, classification)``; ``classification`` is None outside VAC+GAN."""
    fake = forward(nets.generator, batch_z)
    if scheme in BEGAN_FAMILY:
        base = autoencoder_loss(fake, forward(nets.discriminator, fake))
    else:
        base = gan_generator_loss(forward(nets.discriminator, fake), gan_loss)
    if not scheme.startswith("vacgan"):
        return base, base, None
    cls = bce(forward(nets.classifier, fake), _labels_col(labels))
    return vacgan_generator_loss(base, cls, weights), base, cls


def step_generator(scheme: str, nets: Networks, batch_z: Tensor, labels, weights: VacGanWeights, state: TrainState) -> float:
    """One optimiser step on G; for VAC+GAN the classifier loss flows through G."""
    with Tape() as tape:
        loss, _, _ = generator_loss(scheme, nets, batch_z, labels, weights, state.gan_loss)
    _apply(nets.generator, state.opt_g, tape, loss)
    return loss.item()


def step_classifier(nets: Networks, batch_z: Tensor, labels, optimizer: OptimizerState,
                    real: Optional[tuple[Tensor, np.ndarray]] = None) -> float:
    """One step on C against ``bce(C(G(z)), label)``; G is left untouched.

    ``real`` optionally adds a labelled real batch to the classifier's input.
    """
    samples = forward(nets.generator, batch_z)
    targets = _labels_col(labels)
    if real is not None:
        samples = Tensor(np.concatenate([samples.data, real[0].data]))
        targets = np.concatenate([targets, _labels_col(real[1])])
    with Tape() as tape:
        loss = bce(forward(nets.classifier, samples), targets)
    _apply(nets.classifier, optimizer, tape, loss)
    return loss.item()


def initial_state(config: TrainConfig) -> TrainState:
    return TrainState(
        began=config.began,
        opt_d=config.optim_gd.create(),
        opt_g=config.optim_gd.create(),
        opt_c=config.optim_c.create() if config.uses_classifier else None,
        gan_loss=config.gan_loss,
    )


def train(config: TrainConfig, data, networks: Optional[Networks] = None) -> TrainedBundle:
    """Run ``config.steps`` iterations of D, then C, then G.

    ``data`` is a :class:`vacgan.data.LabeledBatch` whose samples match the
    generator's output shape. Everything is determined by ``config.seed``.
    """
    nets = networks or build_networks(config)
    samples = np.asarray(data.samples, dtype=np.float64)
    if samples.shape[1:] != nets.generator.output_shape:
        raise InvalidConfig(f"data samples {samples.shape[1:]} do not match generator output {nets.generator.output_shape}")
    s = child_seeds(config.seed, 8)
    z_rng, batch_rng, real_c_rng = make_rng(s[3]), make_rng(s[4]), make_rng(s[5])
    spec = LatentSpec(config.latent_dim)
    state = initial_state(config)
    began = config.scheme in BEGAN_FAMILY
    history = []
    for step in range(config.steps):
        try:
            z, labels = sample_balanced(spec, config.batch_size, z_rng)
            g_in = generator_input(config, z, labels)
            real = Tensor(samples[batch_rng.integers(0, len(samples), config.batch_size)])

            k_before = state.began
            loss_d, state = step_discriminator(config.scheme, nets, real, g_in, state)
            m_value = convergence_measure(k_before, state.loss_real, state.loss_fake) if began else None

            loss_c = None
            if config.uses_classifier:
                for _ in range(config.classifier_steps):
                    extra = None
                    if config.classifier_real_data:
                        idx = real_c_rng.integers(0, len(samples), config.batch_size)
                        extra = (Tensor(samples[idx]), np.asarray(data.labels)[idx])
                    loss_c = step_classifier(nets, g_in, labels, state.opt_c, extra)

            loss_g = step_generator(config.scheme, nets, g_in, labels, config.weights, state)
        except StepError:
            raise
        except Exception as exc:
            raise StepError(step, exc) from exc
        history.append(StepRecord(step, loss_d, loss_g, loss_c, state.began.k_t if began else None, m_value))
    return TrainedBundle(config, nets, history)


def generate(bundle_or_nets, config: TrainConfig, class_label: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Class-conditioned samples from a trained generator."""
    nets = bundle_or_nets.networks if isinstance(bundle_or_nets, TrainedBundle) else bundle_or_nets
    z = sample(LatentSpec(config.latent_dim), class_label, n, rng)
    g_in = generator_input(config, z, np.full(n, class_label))
    return forward(nets.generator, g_in).data

