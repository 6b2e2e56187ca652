import numpy as np
import pytest

from vacgan.autodiff import make_rng
from vacgan.errors import AllWindowsDegenerate, BadFormat, DimensionMismatch, NoPairs
from vacgan.metrics import (
    K1,
    METRICS,
    MetricReport,
    fitting_ssim_window,
    gaussian_window,
    mae,
    mse,
    pairwise_report,
    rmse,
    ssim,
    ssim_map,
    uqi,
)

COL_A = np.array([[0.0], [1.0]])
COL_B = np.array([[1.0], [1.0]])
SQ_A = np.array([[0.0, 0.5], [1.0, 0.25]])
SQ_B = np.array([[0.5, 0.5], [0.0, 1.0]])


def noise(seed, shape=(16, 16)):
    return make_rng(seed).uniform(0.0, 1.0, shape)


class TestPixelErrors:
    def test_identity(self):
        f = noise(0)
        assert mse(f, f) == rmse(f, f) == mae(f, f) == 0.0

    def test_unit_offset(self):
        zeros, ones = np.zeros((4, 3)), np.ones((4, 3))
        assert mse(zeros, ones) == rmse(zeros, ones) == mae(zeros, ones) == 1.0

    def test_two_by_one(self):
        assert mse(COL_A, COL_B) == 0.5
        assert mae(COL_A, COL_B) == 0.5
        assert rmse(COL_A, COL_B) == np.sqrt(0.5)

    def test_two_by_two(self):
        # differences -0.5, 0, 1, -0.75
        assert mse(SQ_A, SQ_B) == (0.25 + 0 + 1 + 0.5625) / 4
        assert mae(SQ_A, SQ_B) == (0.5 + 0 + 1 + 0.75) / 4

    def test_rmse_squared_is_mse(self):
        for seed in range(20):
            f, g = noise(seed), noise(seed + 100)
            assert rmse(f, g) ** 2 == pytest.approx(mse(f, g), abs=1e-12)

    def test_mae_bounded_by_rmse(self):
        for seed in range(100):
            f, g = noise(seed, (5, 7)), noise(seed + 1000, (5, 7))
            assert mae(f, g) <= rmse(f, g)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mse(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_channel_axis_is_dropped(self):
        assert mse(COL_A[None], COL_B[None]) == 0.5


class TestUqi:
    def test_identical(self):
        f = noise(1)
        assert uqi(f, f) == pytest.approx(1.0, abs=1e-9)

    def test_inverted_image(self):
        f = noise(2, (8, 8))
        # one window: correlation is -1, so the index is negative
        assert uqi(f, 1.0 - f) < 0

    def test_constant_images(self):
        with pytest.raises(AllWindowsDegenerate):
            uqi(np.full((8, 8), 0.3), np.full((8, 8), 0.3))

    def test_window_too_large(self):
        with pytest.raises(DimensionMismatch):
            uqi(noise(0, (4, 4)), noise(1, (4, 4)), window=8)


class TestSsim:
    def test_identical(self):
        f = noise(3)
        assert ssim(f, f) == pytest.approx(1.0, abs=1e-9)

    def test_brightness_shift_single_window(self):
        f = make_rng(4).uniform(0.0, 0.9, (11, 11))
        g = np.clip(f + 0.1, 0.0, 1.0)
        assert ssim_map(f, g).shape == (1, 1)
        # equal variances and covariance cancel the contrast-structure term
        w = gaussian_window()
        mu_f = float((w * f).sum())
        mu_g = mu_f + 0.1
        c1 = K1 ** 2
        expected = (2 * mu_f * mu_g + c1) / (mu_f ** 2 + mu_g ** 2 + c1)
        assert ssim(f, g) == pytest.approx(expected, abs=1e-6)

    def test_independent_noise(self):
        assert np.mean([ssim(noise(s), noise(s + 50)) for s in range(10)]) < 0.2

    def test_image_smaller_than_window(self):
        with pytest.raises(DimensionMismatch):
            ssim(noise(0, (8, 8)), noise(1, (8, 8)))

    def test_fitting_window(self):
        assert fitting_ssim_window((8, 8)) == 7
        assert fitting_ssim_window((48, 48)) == 11


class TestSymmetry:
    @pytest.mark.parametrize("metric", [mse, rmse, mae, uqi, ssim], ids=lambda m: m.__name__)
    def test_symmetric(self, metric):
        for seed in range(5):
            f, g = noise(seed), noise(seed + 7)
            assert metric(f, g) == metric(g, f)


class TestPairwiseReport:
    @staticmethod
    def images(n, seed, side=8):
        return list(make_rng(seed).uniform(0.0, 1.0, (n, side, side)))

    def test_pair_counts(self):
        report = pairwise_report(self.images(80, 0), self.images(80, 1))
        assert report.pair_counts == (3160, 3160, 6400)

    def test_single_image_sets(self):
        img = self.images(1, 0)
        with pytest.raises(NoPairs):
            pairwise_report(img, img)

    def test_duplicated_sets(self):
        a, b = self.images(1, 0) * 2, self.images(1, 1) * 2
        report = pairwise_report(a, b)
        assert report.get("mse", "intra_class_a") == 0.0
        assert report.get("mse", "intra_class_b") == 0.0
        assert report.get("mse", "inter_class") > 0.0

    def test_matches_single_metric_means(self):
        a, b = self.images(4, 2), self.images(3, 3)
        report = pairwise_report(a, b)
        inter = np.mean([mse(x, y) for x in a for y in b])
        intra = np.mean([ssim(a[i], a[j], window=7) for i in range(4) for j in range(i + 1, 4)])
        assert report.get("mse", "inter_class") == pytest.approx(inter, abs=1e-12)
        assert report.get("ssim", "intra_class_a") == pytest.approx(intra, abs=1e-12)

    def test_mixed_shapes(self):
        with pytest.raises(DimensionMismatch):
            pairwise_report(self.images(2, 0), self.images(2, 1, side=9))

    def test_thread_count_does_not_change_values(self, monkeypatch):
        a, b = self.images(40, 4), self.images(40, 5)
        serial = pairwise_report(a, b).to_csv()
        monkeypatch.setenv("VACGAN_THREADS", "4")
        assert pairwise_report(a, b).to_csv() == serial

    def test_csv_round_trip(self):
        report = pairwise_report(self.images(5, 6), self.images(5, 7))
        back = MetricReport.from_csv(report.to_csv())
        assert back.values == report.values
        assert back.pair_counts == report.pair_counts

    def test_csv_missing_column(self):
        text = pairwise_report(self.images(3, 0), self.images(3, 1)).to_csv()
        broken = "\n".join(",".join(row.split(",")[:3]) for row in text.splitlines())
        with pytest.raises(BadFormat, match="inter_class"):
            MetricReport.from_csv(broken)

    def test_csv_missing_metric(self):
        text = pairwise_report(self.images(3, 0), self.images(3, 1)).to_csv()
        broken = "\n".join(line for line in text.splitlines() if not line.startswith("ssim"))
        with pytest.raises(BadFormat, match="ssim"):
            MetricReport.from_csv(broken)

    def test_every_metric_reported(self):
        report = pairwise_report(self.images(3, 0), self.images(3, 1))
        assert set(report.values) == set(METRICS)
        assert all(-1 <= report.get(m, "inter_class") <= 1 for m in ("uqi", "ssim"))
