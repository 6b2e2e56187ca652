import numpy as np
import pytest

from vacgan.data import (
    DatasetSpec,
    decode_pgm,
    encode_pgm,
    generate,
    load_external,
    mosaic,
    points_to_csv,
    read_pgm,
    write_pgm,
)
from vacgan.errors import BadFormat, BadLabel, InvalidSpec, IoError
from vacgan.experiments import probe_accuracy, train_probe


class TestGenerate:
    def test_two_gaussians_class_mean(self):
        batch = generate(DatasetSpec("two_gaussians", seed=0), 1000)
        mean = batch.of_class(0).mean(axis=0)
        assert np.all(np.abs(mean - np.array([-2.0, 0.0])) <= 0.15)

    def test_minimal_batch(self):
        batch = generate(DatasetSpec("two_gaussians"), 1)
        assert len(batch) == 2
        assert sorted(batch.labels.tolist()) == [0, 1]

    @pytest.mark.parametrize("kind", ["two_gaussians", "gaussian_ring_pair", "procedural_glyphs"])
    def test_deterministic(self, kind):
        a = generate(DatasetSpec(kind, seed=4), 20)
        b = generate(DatasetSpec(kind, seed=4), 20)
        np.testing.assert_array_equal(a.samples, b.samples)
        np.testing.assert_array_equal(a.labels, b.labels)

    @pytest.mark.parametrize("kind", ["two_gaussians", "gaussian_ring_pair", "procedural_glyphs"])
    def test_balanced(self, kind):
        batch = generate(DatasetSpec(kind), 13)
        assert np.bincount(batch.labels).tolist() == [13, 13]

    def test_rings_have_configured_radii(self):
        batch = generate(DatasetSpec("gaussian_ring_pair", radii=(1.0, 3.0), noise=0.05), 500)
        r = np.linalg.norm(batch.samples, axis=1)
        assert abs(r[batch.labels == 0].mean() - 1.0) < 0.05
        assert abs(r[batch.labels == 1].mean() - 3.0) < 0.05

    def test_glyphs_in_unit_range(self):
        batch = generate(DatasetSpec("procedural_glyphs", image_side=8), 50)
        assert batch.samples.shape == (100, 1, 8, 8)
        assert batch.samples.min() >= 0.0 and batch.samples.max() <= 1.0

    def test_glyph_families_are_learnable(self):
        train = generate(DatasetSpec("procedural_glyphs", image_side=8, seed=0), 300)
        held_out = generate(DatasetSpec("procedural_glyphs", image_side=8, seed=1), 200)
        probe = train_probe(train, seed=0)
        assert probe_accuracy(probe, {c: held_out.of_class(c) for c in (0, 1)}) > 0.9

    def test_bad_covariance(self):
        spec = DatasetSpec("two_gaussians", covariances=(((1.0, 2.0), (2.0, 1.0)), ((1.0, 0.0), (0.0, 1.0))))
        with pytest.raises(InvalidSpec):
            generate(spec, 5)

    def test_zero_per_class(self):
        with pytest.raises(InvalidSpec):
            generate(DatasetSpec("two_gaussians"), 0)

    def test_unknown_kind(self):
        with pytest.raises(InvalidSpec):
            generate(DatasetSpec("moons"), 5)


class TestPgm:
    def test_round_trip(self):
        pixels = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
        np.testing.assert_array_equal(decode_pgm(encode_pgm(pixels)), pixels)

    def test_header_with_comment(self):
        blob = b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 255])
        assert decode_pgm(blob).tolist() == [[0, 255]]

    def test_not_pgm(self):
        with pytest.raises(BadFormat):
            decode_pgm(b"P2\n1 1\n255\n0")

    def test_truncated(self):
        with pytest.raises(BadFormat):
            decode_pgm(b"P5\n4 4\n255\n" + bytes(3))

    def test_float_encoding_scales(self):
        assert decode_pgm(encode_pgm(np.array([[0.0, 1.0]]))).tolist() == [[0, 255]]

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            read_pgm(tmp_path / "absent.pgm")


class TestExternal:
    def make_corpus(self, root, entries):
        lines = []
        for i, (pixels, label) in enumerate(entries):
            write_pgm(root / f"img{i}.pgm", np.asarray(pixels, dtype=np.uint8))
            lines.append(f"img{i}.pgm\t{label}")
        (root / "manifest.tsv").write_text("\n".join(lines) + "\n")

    def test_two_image_corpus(self, tmp_path):
        self.make_corpus(tmp_path, [([[0, 255], [10, 20]], 0), ([[255, 0], [30, 40]], 1)])
        batch = load_external(tmp_path)
        assert batch.samples.shape == (2, 1, 2, 2)
        assert batch.labels.tolist() == [0, 1]
        assert batch.samples.max() <= 1.0

    def test_endpoint_mapping(self, tmp_path):
        self.make_corpus(tmp_path, [([[0, 255]], 0)])
        batch = load_external(tmp_path)
        assert batch.samples[0, 0, 0, 0] == 0.0
        assert batch.samples[0, 0, 0, 1] == 1.0

    def test_empty_manifest(self, tmp_path):
        (tmp_path / "manifest.tsv").write_text("")
        with pytest.raises(BadLabel):
            load_external(tmp_path)

    def test_bad_label(self, tmp_path):
        self.make_corpus(tmp_path, [([[1]], 2)])
        with pytest.raises(BadLabel):
            load_external(tmp_path)

    def test_dimension_mismatch(self, tmp_path):
        self.make_corpus(tmp_path, [([[1, 2]], 0), ([[1], [2]], 1)])
        with pytest.raises(BadFormat):
            load_external(tmp_path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(IoError):
            load_external(tmp_path)


def test_points_csv():
    batch = generate(DatasetSpec("two_gaussians", seed=1), 2)
    lines = points_to_csv(batch).splitlines()
    assert lines[0] == "x,y,label"
    assert len(lines) == 5
    assert float(lines[1].split(",")[0]) == batch.samples[0, 0]


def test_mosaic_layout():
    imgs = np.ones((5, 1, 2, 2))
    grid = mosaic(imgs, columns=3, pad=1)
    assert grid.shape == (2 * 3 + 1, 3 * 3 + 1)
    assert grid.sum() == 5 * 4
