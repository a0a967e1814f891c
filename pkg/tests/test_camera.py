import numpy as np
import pytest

from bayesdecon import (
    CameraMap,
    ImageGrid,
    adu_to_photon_estimate,
    gaussian_psf,
    simulate_raw,
    uniform_camera,
)

NA, LAM, PITCH = 1.3, 510.0, 65.0


@pytest.fixture(scope="module")
def psf():
    return gaussian_psf(NA, LAM, PITCH, 9)


class TestCameraMap:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            CameraMap(np.ones((4, 4)), np.zeros((4, 4)), np.ones((3, 3)))

    def test_rejects_nonpositive_gain_or_variance(self):
        with pytest.raises(ValueError):
            CameraMap(np.zeros((2, 2)), np.zeros((2, 2)), np.ones((2, 2)))
        with pytest.raises(ValueError):
            CameraMap(np.ones((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))

    def test_uniform_defaults(self):
        cam = uniform_camera((3, 3))
        assert np.all(cam.gain == 2.0)
        assert np.all(cam.offset == 100.0)
        assert np.all(cam.read_variance == 4.0)


class TestSimulateRaw:
    def test_deterministic_given_seed(self, psf):
        obj = ImageGrid(np.full((16, 16), 50.0), PITCH, "object")
        cam = uniform_camera((16, 16))
        a = simulate_raw(obj, psf, cam, seed=11)
        b = simulate_raw(obj, psf, cam, seed=11)
        assert np.array_equal(a.raw.values, b.raw.values)
        assert np.array_equal(a.photons.values, b.photons.values)

    def test_different_seeds_differ(self, psf):
        obj = ImageGrid(np.full((16, 16), 50.0), PITCH, "object")
        cam = uniform_camera((16, 16))
        a = simulate_raw(obj, psf, cam, seed=1)
        b = simulate_raw(obj, psf, cam, seed=2)
        assert not np.array_equal(a.raw.values, b.raw.values)

    def test_photons_are_integers(self, psf):
        obj = ImageGrid(np.full((8, 8), 30.0), PITCH, "object")
        cam = uniform_camera((8, 8))
        rec = simulate_raw(obj, psf, cam, seed=0)
        assert np.all(rec.photons.values == np.round(rec.photons.values))
        assert np.all(rec.photons.values >= 0)

    def test_moment_match(self, psf):
        # E[w] = G mu + o; Var[w] = G^2 mu + sigma^2 for Poisson photons
        mu0, gain, offset, read_sd = 40.0, 2.0, 100.0, 2.0
        n = 64
        obj = ImageGrid(np.full((n, n), mu0), PITCH, "object")
        cam = uniform_camera((n, n), gain, offset, read_sd)
        vals = np.concatenate(
            [simulate_raw(obj, psf, cam, seed=s).raw.values[8:-8, 8:-8].ravel()
             for s in range(10)]
        )
        assert vals.mean() == pytest.approx(gain * mu0 + offset, rel=0.01)
        assert vals.var() == pytest.approx(gain**2 * mu0 + read_sd**2, rel=0.05)

    def test_expected_is_blurred_object(self, psf):
        rng = np.random.default_rng(0)
        obj = ImageGrid(rng.random((16, 16)) * 100, PITCH, "object")
        cam = uniform_camera((16, 16))
        rec = simulate_raw(obj, psf, cam, seed=0)
        from bayesdecon import convolve

        assert np.allclose(rec.expected.values, convolve(obj, psf).values)

    def test_camera_shape_mismatch(self, psf):
        obj = ImageGrid(np.ones((8, 8)), PITCH, "object")
        cam = uniform_camera((9, 9))
        with pytest.raises(ValueError):
            simulate_raw(obj, psf, cam, seed=0)


class TestADUConversion:
    def test_inverts_mean_readout(self):
        cam = uniform_camera((4, 4), gain=2.0, offset=100.0)
        raw = ImageGrid(np.full((4, 4), 160.0), PITCH, "adu")
        est = adu_to_photon_estimate(raw, cam)
        assert np.allclose(est.values, 30.0)

    def test_clamps_below_offset(self):
        cam = uniform_camera((2, 2), gain=2.0, offset=100.0)
        raw = ImageGrid(np.full((2, 2), 90.0), PITCH, "adu")
        est = adu_to_photon_estimate(raw, cam)
        assert np.all(est.values == 0.0)
