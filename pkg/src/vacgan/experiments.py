"""Verification suites and evaluation harnesses shared by the CLI and demos."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from vacgan.autodiff import ops
from vacgan.autodiff.gradcheck import GradCheckResult, grad_check
from vacgan.autodiff.tensor import Tape, Tensor, backward, child_seeds, make_rng
from vacgan.data import DatasetSpec, LabeledBatch, generate as generate_data
from vacgan.divergence import (
    LOG4,
    Gaussian,
    GaussianMixture,
    Grid,
    ce_of_optimal_classifier,
    central_interval,
    empirical_jsd,
    jsd,
    verify_proposition1,
)
from vacgan.models import Model, ModelConfig, build, forward
from vacgan.training import (
    BeganState,
    Networks,
    OptimizerSettings,
    TrainConfig,
    TrainState,
    VacGanWeights,
    autoencoder_loss,
    bce,
    began_discriminator_loss,
    discriminator_loss,
    gan_discriminator_loss,
    gan_generator_loss,
    generate,
    generator_loss,
    train,
    vacgan_generator_loss,
)

SUITES = ("prop1", "thm1", "thm2")
TOLERANCES = {"prop1": 0.05, "thm1_equal": 1e-9, "thm1_bound": 1e-6, "thm2": 1e-6}


@dataclass(frozen=True)
class VerificationCase:
    case_id: str
    analytic: float
    measured: float
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance


def random_mixture(rng: np.random.Generator, dim: int = 1, max_components: int = 3) -> GaussianMixture:
    k = int(rng.integers(1, max_components + 1))
    weights = rng.dirichlet(np.ones(k))
    means = rng.uniform(-3.0, 3.0, size=(k, dim))
    covs = [np.diag(rng.uniform(0.4, 2.0, size=dim) ** 2) for _ in range(k)]
    return GaussianMixture.make(weights, means, covs)


def thm1_cases(n: int = 20, seed: int = 0) -> list[VerificationCase]:
    """Equal pairs reach ``log 4``; unequal pairs sit ``2 jsd`` below it."""
    rng = make_rng(seed)
    cases = []
    for i in range(n):
        dim = 1 + i % 2
        p = random_mixture(rng, dim)
        grid = Grid.covering([p])
        ce = ce_of_optimal_classifier(p, p, grid)
        cases.append(VerificationCase(f"equal-{i}", LOG4, ce, abs(ce - LOG4), TOLERANCES["thm1_equal"]))
    for i in range(n):
        dim = 1 + i % 2
        p, q = random_mixture(rng, dim), random_mixture(rng, dim)
        grid = Grid.covering([p, q])
        ce = ce_of_optimal_classifier(p, q, grid)
        bound = LOG4 - 2.0 * jsd(p, q, grid)
        # the gap below log 4 must be at least 2 jsd (up to 1e-6) and strictly positive
        violation = max(0.0, ce - bound)
        if ce >= LOG4:
            violation = math.inf
        cases.append(VerificationCase(f"unequal-{i}", bound, ce, violation, TOLERANCES["thm1_bound"]))
    return cases


def thm2_cases(n: int = 100, seed: int = 0) -> list[VerificationCase]:
    """``ce_of_optimal_classifier == log 4 - 2 jsd`` on random mixture pairs."""
    rng = make_rng(seed)
    cases = []
    for i in range(n):
        dim = 1 + i % 2
        p, q = random_mixture(rng, dim), random_mixture(rng, dim)
        grid = Grid.covering([p, q])
        ce = ce_of_optimal_classifier(p, q, grid)
        expected = LOG4 - 2.0 * jsd(p, q, grid)
        cases.append(VerificationCase(f"pair-{i}", expected, ce, abs(ce - expected), TOLERANCES["thm2"]))
    return cases


def fit_classifier(
    model: Model,
    sampler,
    steps: int,
    rng: np.random.Generator,
    optimizer: OptimizerSettings = OptimizerSettings("adam", 0.01, 0.9, 0.999),
    batch_size: int = 128,
) -> Model:
    """Minimise BCE on fresh batches from ``sampler(rng, n) -> (x, labels)``."""
    opt = optimizer.create()
    for _ in range(steps):
        x, y = sampler(rng, batch_size)
        with Tape() as tape:
            loss = bce(forward(model, Tensor(x)), np.asarray(y, dtype=np.float64).reshape(-1, 1))
        grads = backward(tape, loss)
        opt.step(model, grads)
    return model


def prop1_case(seed: int, steps: int = 5000, mass: float = 0.99, resolution: int = 2001) -> VerificationCase:
    """Train an MLP on N(+1, 1) (class 1) vs N(-1, 1) (class 0) and compare to the optimal classifier."""
    p1, p2 = Gaussian.make(1.0, 1.0), Gaussian.make(-1.0, 1.0)
    s = child_seeds(seed, 2)
    model = build(ModelConfig("classifier_mlp", widths=(1, 16, 1), activation="tanh"), make_rng(s[0]))

    def sampler(rng, n):
        y = rng.integers(0, 2, n)
        x = rng.standard_normal(n) + np.where(y == 1, 1.0, -1.0)
        return x.reshape(-1, 1), y

    fit_classifier(model, sampler, steps, make_rng(s[1]), OptimizerSettings("adam", 0.002, 0.9, 0.999), batch_size=512)
    lo, hi = central_interval(p1, p2, mass)
    gap = verify_proposition1(p1, p2, model, Grid.make([(lo, hi)], resolution))
    return VerificationCase(f"seed-{seed}", 0.0, gap, gap, TOLERANCES["prop1"])


def prop1_cases(n: int = 5, seed: int = 0, steps: int = 5000) -> list[VerificationCase]:
    return [prop1_case(seed + i, steps) for i in range(n)]


def run_suite(name: str, cases: Optional[int] = None, seed: int = 0, steps: int = 5000) -> list[VerificationCase]:
    if name == "thm1":
        return thm1_cases(cases or 20, seed)
    if name == "thm2":
        return thm2_cases(cases or 100, seed)
    if name == "prop1":
        return prop1_cases(cases or 5, seed, steps)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")


# -- toy separation experiment ---------------------------------------------------

def toy_train_config(scheme: str, seed: int, steps: int = 5000, **overrides) -> TrainConfig:
    """Desk-scale 2-D setup used by the separation experiment."""
    cfg = TrainConfig(
        scheme=scheme,
        generator=ModelConfig("generator", widths=(4, 32, 32, 2)),
        discriminator=ModelConfig("discriminator_scalar", widths=(2, 32, 32, 1)),
        classifier=ModelConfig("classifier_mlp", widths=(2, 16, 1)) if scheme.startswith("vacgan") else None,
        latent_dim=4,
        batch_size=32,
        steps=steps,
        seed=seed,
        weights=VacGanWeights(0.9, 0.1),
        optim_gd=OptimizerSettings("adam", 1e-3, 0.5, 0.999),
        classifier_real_data=True,
    )
    return replace(cfg, **overrides)


def train_probe(data: LabeledBatch, seed: int = 0, steps: int = 1500) -> Model:
    """MLP trained on real labelled samples; only used to grade generated samples."""
    s = child_seeds(seed, 2)
    dim = int(np.prod(data.samples.shape[1:]))
    probe = build(ModelConfig("classifier_mlp", widths=(dim, 16, 1), activation="tanh"), make_rng(s[0]))
    flat = data.samples.reshape(len(data), -1)

    def sampler(rng, n):
        idx = rng.integers(0, len(flat), n)
        return flat[idx], data.labels[idx]

    return fit_classifier(probe, sampler, steps, make_rng(s[1]))


def probe_accuracy(probe: Model, samples_by_class: dict[int, np.ndarray]) -> float:
    """Mean per-class accuracy of ``probe`` on class-conditioned samples."""
    accs = []
    for c, x in samples_by_class.items():
        p = forward(probe, Tensor(np.asarray(x).reshape(len(x), -1))).data.reshape(-1)
        accs.append(float(np.mean((p > 0.5) == (c == 1))))
    return float(np.mean(accs))


@dataclass(frozen=True)
class SeparationResult:
    seed: int
    vacgan_accuracy: float
    vacgan_jsd: float
    baseline_accuracy: float
    baseline_jsd: float

    @property
    def passed(self) -> bool:
        return self.vacgan_accuracy >= 0.9 and self.vacgan_jsd >= self.baseline_jsd


def separation_run(seed: int, steps: int = 5000, n_eval: int = 2000, n_data: int = 2000) -> SeparationResult:
    """Train VAC+GAN and the latent-partition-only GAN under the same budget and data."""
    data = generate_data(DatasetSpec("two_gaussians", seed=10_000 + seed), n_data)
    probe = train_probe(data, seed)
    out = {}
    for scheme in ("vacgan_on_gan", "gan"):
        cfg = toy_train_config(scheme, seed, steps)
        bundle = train(cfg, data)
        rng = make_rng(child_seeds(seed, 9)[8])
        s0 = generate(bundle, cfg, 0, n_eval, rng)
        s1 = generate(bundle, cfg, 1, n_eval, rng)
        out[scheme] = (probe_accuracy(probe, {0: s0, 1: s1}), empirical_jsd(s0, s1))
    return SeparationResult(seed, *out["vacgan_on_gan"], *out["gan"])


# -- BEGAN dynamics on procedural glyphs ------------------------------------------

def glyph_train_config(scheme: str, seed: int, steps: int = 300, **overrides) -> TrainConfig:
    """8x8 glyph setup for the BEGAN-family schemes."""
    vac = scheme.startswith("vacgan")
    cfg = TrainConfig(
        scheme=scheme,
        generator=ModelConfig("generator", image_side=8, channels=(8, 8)),
        discriminator=ModelConfig("discriminator_autoencoder", image_side=8, channels=(8, 8), dense=8),
        classifier=ModelConfig("classifier_conv", image_side=8, channels=(8, 4), dense=32) if vac else None,
        latent_dim=8,
        batch_size=16,
        steps=steps,
        seed=seed,
        classifier_real_data=vac,
    )
    return replace(cfg, **overrides)


def glyph_data(seed: int = 0, n_per_class: int = 500) -> LabeledBatch:
    return generate_data(DatasetSpec("procedural_glyphs", seed=seed, image_side=8), n_per_class)


# -- gradient suite ---------------------------------------------------------------

def _projected(fn, weights: np.ndarray):
    """Reduce a tensor-valued ``fn`` to a scalar with a fixed random projection."""
    r = Tensor(weights)
    return lambda *xs: ops.sum(ops.mul(fn(*xs), r))


def _away_from(rng, shape, kinks=(0.0,), margin=0.05, scale=1.0) -> np.ndarray:
    """Random values with no entry within ``margin`` of any kink."""
    x = rng.standard_normal(shape) * scale
    for k in kinks:
        close = np.abs(x - k) < margin
        x = np.where(close, k + np.where(x >= k, margin, -margin) * 2, x)
    return x


def _distinct_blocks(rng, shape) -> np.ndarray:
    """Inputs whose 2x2 pooling blocks have a clear maximum (gap >= 0.05)."""
    n, c, h, w = shape
    base = rng.permutation(n * c * h * w).astype(np.float64) * 0.05
    return rng.permutation(base).reshape(shape)


def _with_params(model: Model, tensors) -> Model:
    """Shallow copy of ``model`` reading its parameters from ``tensors``."""
    return replace(model, params=dict(zip(sorted(model.params), tensors)))


def _param_point(model: Model) -> list[np.ndarray]:
    return [model.params[k].data for k in sorted(model.params)]


def primitive_checks(seed: int) -> dict[str, Callable[[], GradCheckResult]]:
    """One deferred grad check per primitive, inputs drawn from ``seed``."""
    rng = make_rng(seed)
    m = lambda *s: rng.standard_normal(s)  # noqa: E731
    proj = lambda shape: rng.standard_normal(shape)  # noqa: E731
    checks = {}

    def add_check(name, fn, point, out_shape=None):
        f = _projected(fn, proj(out_shape)) if out_shape is not None else fn
        checks[name] = lambda f=f, point=point: grad_check(f, point)

    r, c = ((3, 4), (2, 5), (5, 3))[seed % 3]
    side = (5, 6, 4)[seed % 3]  # odd and even spatial sizes
    even = side + side % 2
    add_check("add", ops.add, [m(r, c), m(r, c)], (r, c))
    add_check("sub", ops.sub, [m(r, c), m(r, c)], (r, c))
    add_check("mul", ops.mul, [m(r, c), m(r, c)], (r, c))
    factor = float(rng.uniform(-2, 2))
    add_check("scale", lambda x: ops.scale(x, factor), m(r, c), (r, c))
    add_check("matmul", ops.matmul, [m(r, c), m(c, 2)], (r, 2))
    add_check("affine", ops.affine, [m(r, c), m(c, 2), m(2)], (r, 2))
    add_check("conv2d", ops.conv2d, [m(2, 2, side, side), m(3, 2, 3, 3), m(3)], (2, 3, side, side))
    half = -(-even // 2)
    add_check("conv2d_stride2", lambda x, w, b: ops.conv2d(x, w, b, stride=2),
              [m(2, 2, even, even), m(3, 2, 3, 3), m(3)], (2, 3, half, half))
    add_check("conv2d_valid", lambda x, w: ops.conv2d(x, w, padding="valid"),
              [m(1, 2, side, side - 1), m(2, 2, 3, 3)], (1, 2, side - 2, side - 3))
    add_check("maxpool2x2", ops.maxpool2x2, _distinct_blocks(rng, (2, 2, even, even)), (2, 2, even // 2, even // 2))
    add_check("unpool2x2", ops.unpool2x2, m(2, 2, r, c), (2, 2, 2 * r, 2 * c))
    add_check("relu", ops.relu, _away_from(rng, (r, c)), (r, c))
    add_check("elu", ops.elu, _away_from(rng, (r, c)), (r, c))
    add_check("sigmoid", ops.sigmoid, m(r, c), (r, c))
    add_check("tanh", ops.tanh, m(r, c), (r, c))
    add_check("abs", ops.abs, _away_from(rng, (r, c)), (r, c))
    add_check("square", ops.square, m(r, c), (r, c))
    add_check("log", ops.log, rng.uniform(0.2, 3.0, (r, c)), (r, c))
    add_check("clip", lambda x: ops.clip(x, -0.5, 0.5), _away_from(rng, (r, c), kinks=(-0.5, 0.5)), (r, c))
    add_check("mean", ops.mean, m(r, c))
    add_check("sum", ops.sum, m(r, c))
    add_check("reshape", lambda x: ops.reshape(x, (c, r)), m(r, c), (c, r))
    add_check("concat", lambda a, b: ops.concat([a, b], axis=1), [m(r, 3), m(r, 2)], (r, 5))
    return checks


def loss_checks(seed: int) -> dict[str, Callable[[], GradCheckResult]]:
    """Grad checks of BCE, ``L(v)``, ``L_d`` and the weighted ``L_g``.

    Each loss is differentiated with respect to its direct inputs (network
    outputs and data), which keeps the finite-difference oracle well posed.
    Chains through whole networks are covered by :func:`network_chain_checks`.
    """
    rng = make_rng(seed)
    n = 2 + seed % 3  # batch sizes 2, 3, 4 across seeds
    checks = {}
    targets = rng.integers(0, 2, (n, 1)).astype(np.float64)
    weights = VacGanWeights(float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.01, 0.5)))
    k_t = float(rng.uniform(0.0, 1.0))
    probs = lambda: rng.uniform(0.1, 0.9, (n, 1))  # noqa: E731
    images = lambda: rng.uniform(0.0, 1.0, (n, 1, 3, 3))  # noqa: E731

    checks["bce"] = lambda p=probs(): grad_check(lambda q: bce(q, targets), p)
    checks["bce_sigmoid_affine"] = lambda pt=[rng.standard_normal((n, 3)), rng.standard_normal((3, 1)), rng.standard_normal(1)]: grad_check(
        lambda x, w, b: bce(ops.sigmoid(ops.affine(x, w, b)), targets), pt)
    checks["autoencoder_loss"] = lambda pt=[images(), images()]: grad_check(autoencoder_loss, pt)

    def began_l_d(x, dx, g, dg):
        return began_discriminator_loss(autoencoder_loss(x, dx), autoencoder_loss(g, dg), k_t)

    def began_l_g(g, dg):
        return autoencoder_loss(g, dg)

    def vac_began_l_g(g, dg, c):
        return vacgan_generator_loss(autoencoder_loss(g, dg), bce(c, targets), weights)

    def vac_gan_l_g(score, c):
        return vacgan_generator_loss(gan_generator_loss(score), bce(c, targets), weights)

    checks["began_loss_d"] = lambda pt=[images() for _ in range(4)]: grad_check(began_l_d, pt)
    checks["began_loss_g"] = lambda pt=[images(), images()]: grad_check(began_l_g, pt)
    checks["vacgan_on_began_loss_g"] = lambda pt=[images(), images(), probs()]: grad_check(vac_began_l_g, pt)
    checks["gan_loss_d"] = lambda pt=[probs(), probs()]: grad_check(gan_discriminator_loss, pt)
    checks["gan_loss_g"] = lambda pt=probs(): grad_check(gan_generator_loss, pt)
    checks["gan_loss_g_minimax"] = lambda pt=probs(): grad_check(lambda s: gan_generator_loss(s, "minimax"), pt)
    checks["vacgan_on_gan_loss_g"] = lambda pt=[probs(), probs()]: grad_check(vac_gan_l_g, pt)
    return checks


def network_chain_checks(seed: int, tol: float = 1e-3) -> dict[str, Callable[[], GradCheckResult]]:
    """``L_d`` and ``L_g`` differentiated through small smooth networks.

    Parameters enter through ELU and tanh layers, so central differences with
    step 1e-3 carry truncation error that dominates near-zero gradient
    entries; ``tol`` is therefore looser than for the direct loss checks.
    """
    rng = make_rng(seed)
    s = child_seeds(seed, 3)
    gen = build(ModelConfig("generator", widths=(3, 5, 2), activation="tanh"), make_rng(s[0]))
    disc = build(ModelConfig("discriminator_scalar", widths=(2, 5, 1), activation="tanh"), make_rng(s[1]))
    cls = build(ModelConfig("classifier_mlp", widths=(2, 4, 1), activation="tanh"), make_rng(s[2]))
    nets = Networks(gen, disc, cls)
    ae = build(ModelConfig("discriminator_autoencoder", widths=(2, 3), activation="tanh"), make_rng(s[1]))
    began_nets = Networks(gen, ae, cls)
    weights = VacGanWeights(float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.01, 0.5)))
    z = Tensor(rng.standard_normal((4, 3)))
    labels = np.array([0, 1, 0, 1])
    real = Tensor(rng.standard_normal((4, 2)))
    fake = forward(gen, z)
    state = TrainState(began=BeganState(k_t=float(rng.uniform(0.0, 1.0))))

    def l_d(scheme, base):
        def fn(*params):
            local = replace(base, discriminator=_with_params(base.discriminator, params))
            return discriminator_loss(scheme, local, real, fake, state)[0]
        return lambda: grad_check(fn, _param_point(base.discriminator), tol=tol)

    def l_g(scheme, base):
        def fn(*params):
            local = replace(base, generator=_with_params(base.generator, params))
            return generator_loss(scheme, local, z, labels, weights)[0]
        return lambda: grad_check(fn, _param_point(base.generator), tol=tol)

    return {
        "chain_gan_loss_d": l_d("gan", nets),
        "chain_vacgan_on_gan_loss_g": l_g("vacgan_on_gan", nets),
        "chain_began_loss_d": l_d("began", began_nets),
        "chain_vacgan_on_began_loss_g": l_g("vacgan_on_began", began_nets),
    }


def gradient_suite(seeds=range(10)) -> list[tuple[int, str, GradCheckResult]]:
    """Run every primitive and loss check for each seed."""
    results = []
    for seed in seeds:
        for name, run in {**primitive_checks(seed), **loss_checks(seed)}.items():
            results.append((seed, name, run()))
    return results
