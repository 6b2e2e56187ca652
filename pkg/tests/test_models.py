import numpy as np
import pytest

from vacgan.autodiff import Tape, Tensor, backward, make_rng
from vacgan.autodiff import ops
from vacgan.errors import BadFormat, InvalidConfig, ShapeMismatch
from vacgan.models import ModelConfig, build, forward, load_model, save_model, reference_classifier
from vacgan.training import autoencoder_loss

IMAGE_CONFIGS = [
    ModelConfig("generator", image_side=8, channels=(4, 4), latent_dim=6),
    ModelConfig("discriminator_autoencoder", image_side=8, channels=(4, 4), dense=5),
    ModelConfig("discriminator_scalar", image_side=8, dense=6),
    ModelConfig("classifier_conv", image_side=8, channels=(4, 3), dense=7),
]
POINT_CONFIGS = [
    ModelConfig("generator", widths=(4, 8, 2)),
    ModelConfig("discriminator_scalar", widths=(2, 8, 1)),
    ModelConfig("discriminator_autoencoder", widths=(2, 6, 3)),
    ModelConfig("classifier_mlp", widths=(2, 16, 1)),
]


def random_input(model, n=8, seed=0):
    return Tensor(make_rng(seed).uniform(0.0, 1.0, (n, *model.input_shape)))


class TestReferenceClassifier:
    def test_layer_sequence(self):
        model = build(reference_classifier(), make_rng(0))
        assert model.describe() == [
            "Conv3x3(16)/ReLU",
            "MaxPool2x2",
            "Conv3x3(8)/ReLU",
            "MaxPool2x2",
            "Dense(1024)/ReLU",
            "Dense(1)/Sigmoid",
        ]

    def test_parameter_count(self):
        # 160 + 1160 + (8*12*12)*1024 + 1024 + 1025
        assert build(reference_classifier(), make_rng(0)).n_params == 1_183_017

    def test_shapes(self):
        model = build(reference_classifier(), make_rng(0))
        assert model.input_shape == (1, 48, 48)
        assert model.output_shape == (1,)


class TestBuild:
    def test_mlp_classifier_parameter_count(self):
        assert build(ModelConfig("classifier_mlp", widths=(2, 16, 1)), make_rng(0)).n_params == 65

    def test_autoencoder_reconstructs_its_domain(self):
        model = build(ModelConfig("discriminator_autoencoder", image_side=8, channels=(8, 8)), make_rng(0))
        assert model.output_shape == model.input_shape == (1, 8, 8)
        assert forward(model, random_input(model)).shape == (8, 1, 8, 8)

    def test_generator_with_faithful_latent_dim(self):
        model = build(ModelConfig("generator", image_side=8, channels=(8, 8), latent_dim=64), make_rng(0))
        z = Tensor(make_rng(1).standard_normal((16, 64)))
        assert forward(model, z).shape == (16, 1, 8, 8)

    def test_parameter_count_is_pure_function_of_config(self):
        cfg = IMAGE_CONFIGS[1]
        assert build(cfg, make_rng(0)).n_params == build(cfg, make_rng(99)).n_params

    def test_deterministic_given_seed(self):
        a = build(IMAGE_CONFIGS[0], make_rng(3)).snapshot()
        b = build(IMAGE_CONFIGS[0], make_rng(3)).snapshot()
        assert a.keys() == b.keys()
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])

    def test_glorot_bounds_and_zero_biases(self):
        model = build(ModelConfig("classifier_mlp", widths=(3, 5, 1)), make_rng(0))
        w = model.params["dense0.w"].numpy()
        assert np.abs(w).max() <= np.sqrt(6 / (3 + 5))
        assert not model.params["dense0.b"].numpy().any()

    def test_indivisible_image_side(self):
        with pytest.raises(InvalidConfig):
            build(ModelConfig("classifier_conv", image_side=10, channels=(4, 4)), make_rng(0))

    def test_unknown_role(self):
        with pytest.raises(InvalidConfig):
            build(ModelConfig("critic", widths=(2, 1)), make_rng(0))

    def test_generator_output_is_linear(self):
        model = build(ModelConfig("generator", image_side=8, channels=(4,)), make_rng(0))
        assert model.describe()[-1] == "Conv3x3(1)/linear"


class TestForward:
    @pytest.mark.parametrize("cfg", [IMAGE_CONFIGS[2], IMAGE_CONFIGS[3], POINT_CONFIGS[1], POINT_CONFIGS[3]])
    def test_classifier_outputs_in_open_unit_interval(self, cfg):
        model = build(cfg, make_rng(0))
        out = forward(model, Tensor(make_rng(1).standard_normal((16, *model.input_shape)) * 3)).numpy()
        assert np.all(out > 0) and np.all(out < 1)

    def test_zero_autoencoder_gives_constant_output(self):
        model = build(IMAGE_CONFIGS[1], make_rng(0))
        model.set_params({k: Tensor(np.zeros(v.shape)) for k, v in model.params.items()})
        x = random_input(model)
        out = forward(model, x).numpy()
        assert np.all(out == 0.0)
        assert np.isfinite(autoencoder_loss(x, Tensor(out)).item())

    def test_pure(self):
        model = build(IMAGE_CONFIGS[0], make_rng(0))
        z = Tensor(make_rng(2).standard_normal((4, 6)))
        np.testing.assert_array_equal(forward(model, z).numpy(), forward(model, z).numpy())

    def test_wrong_input_shape(self):
        model = build(POINT_CONFIGS[0], make_rng(0))
        with pytest.raises(ShapeMismatch):
            forward(model, Tensor(np.zeros((3, 5))))

    def test_explicit_tape(self):
        model = build(POINT_CONFIGS[3], make_rng(0))
        tape = Tape()
        out = forward(model, random_input(model), tape=tape)
        assert tape.nodes and tape.nodes[-1].output is out

    @pytest.mark.parametrize("cfg", IMAGE_CONFIGS + POINT_CONFIGS, ids=lambda c: f"{c.role}-{c.image_side}")
    def test_no_dead_parameters(self, cfg):
        model = build(cfg, make_rng(0))
        x = Tensor(make_rng(1).standard_normal((8, *model.input_shape)))
        with Tape() as tape:
            loss = ops.mean(ops.square(forward(model, x)))
        grads = backward(tape, loss)
        dead = [name for name, p in model.params.items() if not np.any(grads[p].numpy())]
        assert not dead


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        model = build(IMAGE_CONFIGS[3], make_rng(0))
        save_model(model, tmp_path / "c")
        fresh = load_model(build(IMAGE_CONFIGS[3], make_rng(5)), tmp_path / "c")
        for k, v in model.snapshot().items():
            np.testing.assert_array_equal(fresh.params[k].numpy(), v)

    def test_manifest_lists_every_parameter(self, tmp_path):
        model = build(POINT_CONFIGS[0], make_rng(0))
        save_model(model, tmp_path)
        names = [line.split("\t")[0] for line in (tmp_path / "manifest.txt").read_text().splitlines()]
        assert sorted(names) == sorted(model.params)

    def test_architecture_mismatch(self, tmp_path):
        save_model(build(POINT_CONFIGS[0], make_rng(0)), tmp_path)
        with pytest.raises(BadFormat):
            load_model(build(ModelConfig("generator", widths=(4, 9, 2)), make_rng(0)), tmp_path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(BadFormat):
            load_model(build(POINT_CONFIGS[0], make_rng(0)), tmp_path)
