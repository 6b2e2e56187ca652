import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vacgan.autodiff import Tape, Tensor, backward, make_rng
from vacgan.data import DatasetSpec, LabeledBatch, generate as generate_data
from vacgan.errors import InvalidConfig, NonFinite, ShapeMismatch, StepError
from vacgan.experiments import glyph_data, glyph_train_config, loss_checks, network_chain_checks, toy_train_config
from vacgan.latent import LatentSpec, sample_balanced
from vacgan.metrics import mse
from vacgan.models import Model, ModelConfig, build, forward
from vacgan.training import (
    BCE_EPS,
    BeganState,
    Networks,
    OptimizerSettings,
    OptimizerState,
    TrainConfig,
    TrainState,
    VacGanWeights,
    adam,
    autoencoder_loss,
    bce,
    began_k_update,
    build_networks,
    convergence_measure,
    discriminator_loss,
    generate,
    generator_loss,
    initial_state,
    nesterov,
    step_classifier,
    step_discriminator,
    step_generator,
    train,
)


def snapshot(model):
    return model.snapshot()


def unchanged(model, before):
    return all(np.array_equal(model.params[k].numpy(), v) for k, v in before.items())


def point_nets(seed=0, scheme="vacgan_on_gan"):
    cfg = toy_train_config(scheme, seed, steps=1)
    return cfg, build_networks(cfg)


class TestBce:
    def test_half_with_positive_target(self):
        assert bce(Tensor([[0.5]]), [[1.0]]).item() == pytest.approx(math.log(2), abs=1e-12)

    def test_near_perfect_prediction(self):
        assert bce(Tensor([[1 - BCE_EPS]]), [[1.0]]).item() == pytest.approx(BCE_EPS, rel=1e-6)

    def test_batch(self):
        value = bce(Tensor([[0.9], [0.2]]), [[1.0], [0.0]]).item()
        assert value == pytest.approx((-math.log(0.9) - math.log(0.8)) / 2, abs=1e-12)
        assert value == pytest.approx(0.1643, abs=1e-4)

    def test_clamp_keeps_log_finite(self):
        assert math.isfinite(bce(Tensor([[0.0], [1.0]]), [[1.0], [0.0]]).item())

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            bce(Tensor([[0.5], [0.5]]), [[1.0]])


class TestAutoencoderLoss:
    def test_identity(self):
        v = Tensor(make_rng(0).standard_normal((2, 3)))
        assert autoencoder_loss(v, v).item() == 0.0

    def test_direct_arithmetic(self):
        assert autoencoder_loss(Tensor([1.0, 0.0]), Tensor([0.0, 0.0])).item() == 0.5

    def test_matches_metric_mse(self):
        rng = make_rng(1)
        a, b = rng.uniform(size=(6, 5)), rng.uniform(size=(6, 5))
        assert autoencoder_loss(Tensor(a), Tensor(b)).item() == pytest.approx(mse(a, b), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            autoencoder_loss(Tensor(np.zeros(2)), Tensor(np.zeros(3)))


class TestBeganUpdate:
    def test_direct_arithmetic(self):
        assert began_k_update(BeganState(0.0, 0.001, 0.5), 1.0, 0.2).k_t == pytest.approx(0.0003, abs=1e-15)

    def test_lower_clamp(self):
        assert began_k_update(BeganState(0.0), 0.1, 50.0).k_t == 0.0

    def test_upper_clamp(self):
        assert began_k_update(BeganState(1.0), 2.0, 0.0).k_t == 1.0

    def test_nonfinite(self):
        with pytest.raises(NonFinite):
            began_k_update(BeganState(), float("nan"), 0.1)

    def test_convergence_measure(self):
        assert convergence_measure(BeganState(gamma=0.5), 0.4, 0.3) == pytest.approx(0.4 + 0.1)

    @pytest.mark.parametrize("kwargs", [{"k_t": 1.5}, {"lambda_k": 0.0}, {"gamma": 0.0}, {"gamma": 1.2}])
    def test_invalid_state(self, kwargs):
        with pytest.raises(InvalidConfig):
            BeganState(**kwargs)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 100), st.floats(0, 100))
    def test_k_stays_in_unit_interval(self, k, lr, lf):
        assert 0.0 <= began_k_update(BeganState(k), lr, lf).k_t <= 1.0


class TestWeights:
    def test_default_split(self):
        w = VacGanWeights()
        assert (w.vartheta, w.zeta) == (0.997, 0.003)

    @pytest.mark.parametrize("pair", [(-0.1, 0.5), (0.0, 0.0)])
    def test_invalid(self, pair):
        with pytest.raises(InvalidConfig):
            VacGanWeights(*pair)


class TestOptimizers:
    """5 steps on f(p) = (p - 3)^2 / 2 from p = 0, so g = p - 3."""

    @staticmethod
    def quadratic_model():
        return Model(ModelConfig("generator", widths=(1, 1)), [], {"p": Tensor(0.0, requires_grad=True)}, (1,), (1,))

    def run(self, opt):
        model = self.quadratic_model()
        trace = []
        for _ in range(5):
            p = model.params["p"]
            with Tape() as tape:
                loss = (p - Tensor(3.0)) * (p - Tensor(3.0)) * 0.5
            opt.step(model, backward(tape, loss))
            trace.append(model.params["p"].item())
        return trace

    def test_adam(self):
        # step 1: m = -0.3, v = 0.009, a_1 = 0.1 * sqrt(0.001) / 0.1, p = a_1 * 0.3 / (sqrt(0.009) + 1e-8)
        expected = [0.09999998945907558, 0.19989727481961933, 0.2996184527059369, 0.3990864398076114,
                    0.49822050988386735]
        np.testing.assert_allclose(self.run(adam(0.1, 0.9, 0.999)), expected, rtol=0, atol=1e-14)

    def test_nesterov(self):
        # step 1: vel = 0.3, p = 0.9 * 0.3 + 0.3 = 0.57; step 2: g = -2.43, vel = 0.513, p = 1.2747
        expected = [0.57, 1.2747, 2.018037, 2.71833627, 3.3137450517]
        np.testing.assert_allclose(self.run(nesterov(0.1, 0.9)), expected, rtol=0, atol=1e-12)

    def test_moments_match_parameter_shapes(self):
        cfg, nets = point_nets()
        opt = adam()
        x = Tensor(make_rng(0).standard_normal((4, 2)))
        with Tape() as tape:
            loss = bce(forward(nets.classifier, x), np.ones((4, 1)))
        opt.step(nets.classifier, backward(tape, loss))
        for name, p in nets.classifier.params.items():
            assert all(m.shape == p.shape for m in opt.moments[name])

    def test_unknown_kind(self):
        with pytest.raises(InvalidConfig):
            OptimizerState("sgd", 0.1)

    def test_default_optimizer_settings(self):
        gd = TrainConfig("gan", ModelConfig("generator", widths=(4, 2)), ModelConfig("discriminator_scalar", widths=(2, 1)))
        assert (gd.optim_gd.kind, gd.optim_gd.learning_rate, gd.optim_gd.beta1, gd.optim_gd.beta2) == ("adam", 1e-4, 0.5, 0.999)
        assert (gd.optim_c.kind, gd.optim_c.learning_rate, gd.optim_c.momentum) == ("nesterov_momentum", 0.01, 0.9)


class TestStepDiscriminator:
    def test_isolation(self):
        cfg, nets = point_nets()
        g0, c0, d0 = snapshot(nets.generator), snapshot(nets.classifier), snapshot(nets.discriminator)
        z, _ = sample_balanced(LatentSpec(4), 8, make_rng(0))
        step_discriminator("vacgan_on_gan", nets, Tensor(make_rng(1).standard_normal((8, 2))), z, initial_state(cfg))
        assert unchanged(nets.generator, g0) and unchanged(nets.classifier, c0)
        assert not unchanged(nets.discriminator, d0)

    def test_single_step_matches_manual_update(self):
        # D(x) = sigmoid(w x + b): two parameters, gradients worked out by hand
        rng = make_rng(3)
        gen = build(ModelConfig("generator", widths=(2, 1)), rng)
        disc = build(ModelConfig("discriminator_scalar", widths=(1, 1)), rng)
        nets = Networks(gen, disc)
        real = Tensor(np.array([[0.5], [1.5], [-0.2]]))
        z = Tensor(rng.standard_normal((3, 2)))
        fake = forward(gen, z).numpy()
        w, b = disc.params["dense0.w"].item(), disc.params["dense0.b"].item()

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        sr, sf = sig(w * real.numpy() + b), sig(w * fake + b)
        gw = np.mean((sr - 1) * real.numpy()) + np.mean(sf * fake)
        gb = np.mean(sr - 1) + np.mean(sf)

        state = TrainState(opt_d=OptimizerState("nesterov_momentum", 0.05, momentum=0.9))
        step_discriminator("gan", nets, real, z, state)
        # first Nesterov step from zero velocity: p -= lr * g * (1 + momentum)
        assert disc.params["dense0.w"].item() == pytest.approx(w - 0.05 * gw * 1.9, abs=1e-12)
        assert disc.params["dense0.b"].item() == pytest.approx(b - 0.05 * gb * 1.9, abs=1e-12)

    def test_began_loss_recomposes(self):
        cfg = glyph_train_config("began", 0, steps=1)
        nets = build_networks(cfg)
        rng = make_rng(0)
        real = Tensor(rng.uniform(size=(4, 1, 8, 8)))
        z, _ = sample_balanced(LatentSpec(8), 4, rng)
        fake = forward(nets.generator, z)
        state = TrainState(began=BeganState(k_t=0.37))
        loss, l_real, l_fake = discriminator_loss("began", nets, real, fake, state)
        parts = (autoencoder_loss(real, forward(nets.discriminator, real)).item()
                 - 0.37 * autoencoder_loss(fake, forward(nets.discriminator, fake)).item())
        assert loss.item() == pytest.approx(parts, abs=1e-15)
        assert l_real.item() - 0.37 * l_fake.item() == loss.item()

    def test_began_state_advances(self):
        cfg = glyph_train_config("began", 0, steps=1)
        nets = build_networks(cfg)
        state = initial_state(cfg)
        rng = make_rng(0)
        z, _ = sample_balanced(LatentSpec(8), 4, rng)
        _, state = step_discriminator("began", nets, Tensor(rng.uniform(size=(4, 1, 8, 8))), z, state)
        expected = began_k_update(cfg.began, state.loss_real, state.loss_fake).k_t
        assert state.began.k_t == expected


class TestStepGenerator:
    def setup_method(self):
        self.cfg, self.nets = point_nets()
        self.z, self.labels = sample_balanced(LatentSpec(4), 8, make_rng(0))

    def test_zeta_zero_reduces_to_base(self):
        total, base, _ = generator_loss("vacgan_on_gan", self.nets, self.z, self.labels, VacGanWeights(1.0, 0.0))
        plain, _, _ = generator_loss("gan", self.nets, self.z, self.labels, VacGanWeights())
        assert total.item() == base.item() == plain.item()

    def test_default_weights_recompose(self):
        total, base, cls = generator_loss("vacgan_on_gan", self.nets, self.z, self.labels, VacGanWeights(0.997, 0.003))
        assert total.item() == pytest.approx(0.997 * base.item() + 0.003 * cls.item(), abs=1e-12)

    def test_isolation(self):
        d0, c0, g0 = snapshot(self.nets.discriminator), snapshot(self.nets.classifier), snapshot(self.nets.generator)
        step_generator("vacgan_on_gan", self.nets, self.z, self.labels, VacGanWeights(), initial_state(self.cfg))
        assert unchanged(self.nets.discriminator, d0) and unchanged(self.nets.classifier, c0)
        assert not unchanged(self.nets.generator, g0)

    def test_classifier_gradient_reaches_generator(self):
        # with vartheta = 0 the only signal is the classification loss
        state = initial_state(self.cfg)
        g0 = snapshot(self.nets.generator)
        step_generator("vacgan_on_gan", self.nets, self.z, self.labels, VacGanWeights(0.0, 1.0), state)
        assert not unchanged(self.nets.generator, g0)

    def test_minimax_form(self):
        ns, _, _ = generator_loss("gan", self.nets, self.z, self.labels, VacGanWeights(), "non_saturating")
        mm, _, _ = generator_loss("gan", self.nets, self.z, self.labels, VacGanWeights(), "minimax")
        assert mm.item() < 0 < ns.item()


class TestLossGradients:
    @pytest.mark.parametrize("seed", range(10))
    def test_losses_pass_grad_check(self, seed):
        results = {name: run() for name, run in loss_checks(seed).items()}
        assert all(r.passed for r in results.values()), {k: r.max_rel_error for k, r in results.items()}

    @pytest.mark.parametrize("seed", range(5))
    def test_generator_parameter_gradients(self, seed):
        results = {name: run() for name, run in network_chain_checks(seed).items()}
        assert all(r.passed for r in results.values()), {k: r.max_rel_error for k, r in results.items()}


class TestStepClassifier:
    def test_untrained_is_near_chance(self):
        cfg, nets = point_nets()
        z, labels = sample_balanced(LatentSpec(4), 64, make_rng(0))
        loss = step_classifier(nets, z, labels, nesterov())
        assert abs(loss - math.log(2)) < 0.2

    def test_decreases_with_frozen_generator(self):
        cfg, nets = point_nets()
        # a generator that copies its partition coordinate makes the classes separable
        w = np.zeros((4, 2))
        w[0, 0] = 3.0
        g = build(ModelConfig("generator", widths=(4, 2)), make_rng(0))
        g.set_params({"dense0.w": Tensor(w), "dense0.b": Tensor(np.zeros(2))})
        nets = Networks(g, nets.discriminator, nets.classifier)
        rng = make_rng(1)
        opt = nesterov()
        g0 = snapshot(g)
        losses = []
        for _ in range(50):
            z, labels = sample_balanced(LatentSpec(4), 32, rng)
            losses.append(step_classifier(nets, z, labels, opt))
        assert unchanged(g, g0)
        assert losses[-1] < losses[0]
        assert np.mean(losses[-10:]) < np.mean(losses[:10])

    def test_real_data_mixing(self):
        cfg, nets = point_nets()
        z, labels = sample_balanced(LatentSpec(4), 8, make_rng(0))
        real = (Tensor(make_rng(1).standard_normal((8, 2))), np.array([0, 1] * 4))
        assert math.isfinite(step_classifier(nets, z, labels, nesterov(), real))


class TestTrain:
    def points(self, seed=0):
        return generate_data(DatasetSpec("two_gaussians", seed=seed), 100)

    def test_zero_steps_keeps_initialisation(self):
        cfg = toy_train_config("vacgan_on_gan", 3, steps=0)
        bundle = train(cfg, self.points())
        fresh = build_networks(cfg)
        assert bundle.history == []
        for name in ("generator", "discriminator", "classifier"):
            assert unchanged(getattr(bundle.networks, name), snapshot(getattr(fresh, name)))

    def test_deterministic(self):
        cfg = toy_train_config("vacgan_on_gan", 5, steps=15)
        a = train(cfg, self.points()).history_csv()
        b = train(cfg, self.points()).history_csv()
        assert a == b

    def test_history_rows_and_header(self):
        cfg = toy_train_config("gan", 0, steps=7)
        lines = train(cfg, self.points()).history_csv().splitlines()
        assert lines[0] == "step,loss_d,loss_g,loss_c,k_t,M"
        assert len(lines) == 8
        assert lines[1].endswith(",,,")  # gan has no classifier, k_t or M

    def test_zeta_zero_matches_began(self):
        data = glyph_data(0, 40)
        base = glyph_train_config("began", 1, steps=4)
        vac = glyph_train_config("vacgan_on_began", 1, steps=4, weights=VacGanWeights(1.0, 0.0))
        a, b = train(base, data).history, train(vac, data).history
        assert [(r.loss_d, r.loss_g, r.k_t, r.M) for r in a] == [(r.loss_d, r.loss_g, r.k_t, r.M) for r in b]

    def test_began_invariants(self):
        bundle = train(glyph_train_config("cbegan", 2, steps=6), glyph_data(2, 40))
        assert all(0.0 <= k <= 1.0 for k in bundle.k_trace)
        assert all(math.isfinite(r.M) for r in bundle.history)

    def test_label_concat_widens_generator_input(self):
        cfg = replace(glyph_train_config("cbegan", 0, steps=2), conditioning_mode="label_concat")
        bundle = train(cfg, glyph_data(0, 20))
        assert bundle.networks.generator.input_shape == (cfg.latent_dim + 2,)
        assert generate(bundle, cfg, 1, 3, make_rng(0)).shape == (3, 1, 8, 8)

    def test_step_error_reports_index(self):
        cfg = toy_train_config("gan", 0, steps=3, batch_size=4)
        data = LabeledBatch(np.full((10, 2), np.inf), np.zeros(10, dtype=np.int64))
        with pytest.raises(StepError) as info:
            train(cfg, data)
        assert info.value.step == 0

    def test_data_shape_must_match_generator(self):
        with pytest.raises(InvalidConfig):
            train(toy_train_config("gan", 0, steps=1), glyph_data(0, 5))

    def test_vacgan_requires_classifier(self):
        with pytest.raises(InvalidConfig):
            toy_train_config("vacgan_on_gan", 0, classifier=None).validate()

    def test_began_needs_autoencoder(self):
        with pytest.raises(InvalidConfig):
            toy_train_config("began", 0).validate()

    @settings(max_examples=8, deadline=None)
    @given(st.sampled_from(["gan", "vacgan_on_gan"]), st.integers(0, 1000), st.integers(2, 6))
    def test_step_isolation_over_random_configs(self, scheme, seed, hidden):
        cfg = toy_train_config(scheme, seed, steps=1,
                               generator=ModelConfig("generator", widths=(4, hidden, 2)),
                               discriminator=ModelConfig("discriminator_scalar", widths=(2, hidden, 1)))
        nets = build_networks(cfg)
        rng = make_rng(seed)
        z, labels = sample_balanced(LatentSpec(4), 6, rng)
        real = Tensor(rng.standard_normal((6, 2)))
        state = initial_state(cfg)
        before = {k: snapshot(m) for k, m in vars(nets).items() if m is not None}

        def only(changed):
            for name, snap in before.items():
                model = getattr(nets, name)
                assert unchanged(model, snap) == (name != changed)
                before[name] = snapshot(model)

        step_discriminator(scheme, nets, real, z, state)
        only("discriminator")
        if nets.classifier is not None:
            step_classifier(nets, z, labels, state.opt_c)
            only("classifier")
        step_generator(scheme, nets, z, labels, cfg.weights, state)
        only("generator")

    def test_settings_create_optimizer(self):
        opt = OptimizerSettings("nesterov_momentum", 0.02, momentum=0.5).create()
        assert (opt.kind, opt.learning_rate, opt.momentum) == ("nesterov_momentum", 0.02, 0.5)
