import numpy as np
import pytest

from bayesdecon import (
    ImageGrid,
    convolve,
    gaussian_psf,
    rl_run,
    rl_step,
    simulate_raw,
    uniform_camera,
)

from oracles import direct_correlate, log_poisson_pmf

PITCH = 65.0


@pytest.fixture(scope="module")
def psf():
    return gaussian_psf(1.3, 510.0, PITCH, 9)


def poisson_loglik(data: np.ndarray, mu: np.ndarray) -> float:
    mu = np.maximum(mu, 1e-300)
    return float(np.sum(data * np.log(mu) - mu))


class TestRLStep:
    def test_matches_hand_computation(self, psf):
        rng = np.random.default_rng(0)
        est = rng.random((16, 16)) + 0.1
        data = rng.random((16, 16)) * 10
        got = rl_step(
            ImageGrid(est, PITCH, "object"), ImageGrid(data, PITCH, "expected"), psf
        ).values
        from oracles import direct_convolve

        blurred = direct_convolve(est, psf.values)
        want = est * direct_correlate(data / (blurred + 1e-12), psf.values)
        assert np.abs(got - want).max() < 1e-9 * want.max()

    def test_fixed_point_on_noiseless_blur(self, psf):
        # if the estimate already explains the data exactly, RL leaves it
        # (nearly) unchanged for interior-supported objects
        truth = np.zeros((48, 48))
        truth[16:32, 16:32] = 50.0
        g = ImageGrid(truth, PITCH, "object")
        data = convolve(g, psf)
        stepped = rl_step(g, data, psf)
        interior = np.s_[8:-8, 8:-8]
        assert np.abs(stepped.values[interior] - truth[interior]).max() < 1e-6 * 50.0

    def test_rejects_negative_data(self, psf):
        est = ImageGrid(np.ones((8, 8)), PITCH, "object")
        bad = ImageGrid(-np.ones((8, 8)), PITCH, "adu", _skip_checks=True)
        with pytest.raises(ValueError):
            rl_step(est, bad, psf)

    def test_preserves_nonnegativity_and_mass(self, psf):
        rng = np.random.default_rng(1)
        data = ImageGrid(rng.poisson(30.0, (32, 32)).astype(float), PITCH, "expected")
        est = ImageGrid(np.full((32, 32), float(data.values.mean())), PITCH, "object")
        for _ in range(5):
            est = rl_step(est, data, psf)
            assert est.values.min() >= 0


class TestRLRun:
    def test_em_monotone_loglikelihood(self, psf):
        # RL is EM for the Poisson model: likelihood never decreases
        truth = ImageGrid(_dark_border_scene(64), PITCH, "object")
        cam = uniform_camera((64, 64), gain=1.0, offset=0.0, read_sd=1e-6)
        rec = simulate_raw(truth, psf, cam, seed=3)
        data = rec.photons
        est = data.like(np.full(data.shape, float(data.values.mean())), "object")
        prev = poisson_loglik(data.values, convolve(est, psf).values)
        for _ in range(200):
            est = rl_step(est, data, psf)
            cur = poisson_loglik(data.values, convolve(est, psf).values)
            assert cur >= prev - 1e-8
            prev = cur

    def test_checkpoints_and_metrics(self, psf):
        truth = ImageGrid(_dark_border_scene(32), PITCH, "object")
        cam = uniform_camera((32, 32), gain=1.0, offset=0.0, read_sd=1e-6)
        data = simulate_raw(truth, psf, cam, seed=0).photons
        trace = rl_run(data, psf, 20, checkpoints=[1, 5, 20], reference=truth)
        assert trace.iterations == [1, 5, 20]
        assert len(trace.snapshots) == 3
        assert len(trace.psnr_db) == 20
        assert len(trace.rmse_values) == 20
        assert np.array_equal(trace.snapshots[-1].values, trace.final.values)

    def test_improves_over_flat_start(self, psf):
        truth = ImageGrid(_dark_border_scene(48), PITCH, "object")
        cam = uniform_camera((48, 48), gain=1.0, offset=0.0, read_sd=1e-6)
        data = simulate_raw(truth, psf, cam, seed=1).photons
        trace = rl_run(data, psf, 10, reference=truth)
        assert trace.psnr_db[9] > trace.psnr_db[0]

    def test_invalid_iters(self, psf):
        data = ImageGrid(np.ones((8, 8)), PITCH, "expected")
        with pytest.raises(ValueError):
            rl_run(data, psf, 0)


def _dark_border_scene(n: int) -> np.ndarray:
    vals = np.zeros((n, n))
    rng = np.random.default_rng(99)
    inner = rng.random((n - 16, n - 16)) * 120
    vals[8:-8, 8:-8] = inner
    return vals
