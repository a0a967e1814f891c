import numpy as np
import pytest

from bayesdecon import ImageGrid, compare, cv_map, psnr, radial_spectrum, rmse
from bayesdecon.metrics import PSNR_CAP_DB, super_cutoff_energy_fraction

PITCH = 65.0


def grid(vals):
    return ImageGrid(np.asarray(vals, dtype=float), PITCH, "object")


class TestRMSE:
    def test_hand_value(self):
        a = grid([[1.0, 2.0], [3.0, 4.0]])
        b = grid([[1.0, 2.0], [3.0, 6.0]])
        assert rmse(a, b) == pytest.approx(1.0)  # sqrt(4/4)

    def test_zero_on_identical(self):
        a = grid(np.random.default_rng(0).random((4, 4)))
        assert rmse(a, a) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse(grid(np.ones((2, 2))), grid(np.ones((3, 3))))


class TestPSNR:
    def test_hand_value(self):
        ref = grid([[10.0, 10.0], [10.0, 10.0]])
        a = grid([[11.0, 9.0], [11.0, 9.0]])
        # rmse = 1, max = 10 -> 20 dB
        assert psnr(a, ref) == pytest.approx(20.0)

    def test_max_from_reference_by_default(self):
        ref = grid([[0.0, 100.0], [0.0, 0.0]])
        a = grid([[1.0, 100.0], [0.0, 0.0]])
        # rmse = 0.5, max = 100 -> 46.02 dB
        assert psnr(a, ref) == pytest.approx(20 * np.log10(200), rel=1e-9)

    def test_exact_match_capped(self):
        a = grid(np.ones((3, 3)))
        assert psnr(a, a) == PSNR_CAP_DB

    def test_explicit_max(self):
        ref = grid([[10.0, 10.0], [10.0, 10.0]])
        a = grid([[11.0, 9.0], [11.0, 9.0]])
        assert psnr(a, ref, max_value=100.0) == pytest.approx(40.0)

    def test_compare_report(self):
        ref = grid([[10.0, 10.0], [10.0, 10.0]])
        a = grid([[11.0, 9.0], [11.0, 9.0]])
        rep = compare(a, ref)
        assert rep.psnr_db == pytest.approx(20.0)
        assert rep.rmse == pytest.approx(1.0)
        assert rep.n_pixels == 4
        assert rep.max_value_used == 10.0


class TestCVMap:
    def _summary(self, mean, second, n=10):
        from bayesdecon.sampler import PosteriorSummary

        return PosteriorSummary(
            mean=ImageGrid(mean, PITCH, "object", _skip_checks=True),
            second_moment=ImageGrid(second, PITCH, "object", _skip_checks=True),
            n_accumulated=n,
            retained_samples=[],
            cv=ImageGrid(np.zeros_like(mean), PITCH, "object", _skip_checks=True),
            acceptance_rate=0.5,
        )

    def test_hand_value(self):
        mean = np.full((2, 2), 4.0)
        second = np.full((2, 2), 17.0)  # var = 1 -> std = 1 -> cv = 0.25
        cv = cv_map(self._summary(mean, second))
        assert np.allclose(cv.values, 0.25)

    def test_zero_mean_flagged_nan(self):
        mean = np.array([[0.0, 4.0]])
        second = np.array([[0.0, 17.0]])
        cv = cv_map(self._summary(mean, second))
        assert np.isnan(cv.values[0, 0])
        assert cv.values[0, 1] == pytest.approx(0.25)

    def test_requires_two_samples(self):
        with pytest.raises(ValueError):
            cv_map(self._summary(np.ones((2, 2)), np.ones((2, 2)), n=1))


class TestSpectra:
    def test_radial_spectrum_of_sinusoid_peaks_at_its_frequency(self):
        n = 64
        cycles = 8  # frequency = cycles / (n * pitch)
        x = np.arange(n)
        img = grid(50 + 20 * np.cos(2 * np.pi * cycles * x / n)[None, :] * np.ones((n, 1)))
        freqs, prof = radial_spectrum(img)
        f_target = cycles / (n * PITCH)
        prof = prof.copy()
        prof[0] = np.nan  # first bin holds the DC term
        peak_bin = np.nanargmax(prof)
        assert abs(freqs[peak_bin] - f_target) <= (freqs[1] - freqs[0]) * 1.5

    def test_super_cutoff_fraction_bounds(self):
        rng = np.random.default_rng(0)
        img = grid(rng.random((32, 32)))
        f = super_cutoff_energy_fraction(img, cutoff_frequency=1e-9)
        assert 0.0 < f < 1.0
        f_all = super_cutoff_energy_fraction(img, cutoff_frequency=1.0)
        assert f_all == 0.0

    def test_lowpass_image_has_less_super_cutoff_energy(self):
        from bayesdecon import convolve, gaussian_psf

        rng = np.random.default_rng(1)
        noisy = grid(rng.random((64, 64)) * 100)
        psf = gaussian_psf(1.3, 510.0, PITCH, 9)
        smooth = convolve(noisy, psf)
        cut = psf.cutoff_frequency
        assert super_cutoff_energy_fraction(smooth, cut) < super_cutoff_energy_fraction(
            noisy, cut
        )
