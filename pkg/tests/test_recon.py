import warnings

import numpy as np
import pytest
from sklearn.base import clone

from wdaep.data import make_phantom
from wdaep.errors import ConfigError, ShapeError
from wdaep.kspace import encode, fft2_unitary, mask_radial, mask_random2d, zero_filled
from wdaep.prior import Architecture, GaussianSurrogatePrior, build_network
from wdaep.recon import (
    ReconConfig,
    WDAEPRec,
    data_consistency,
    prior_gradient_step,
    reconstruct,
    sigma_for_acceleration,
)
from wdaep.wavelet import filter_bank, uwt_inverse

from .conftest import random_complex

SIGMA = 0.1


class ZeroNet:
    input_channels = 8
    meta = {}

    def forward(self, x):
        return np.zeros_like(x)

    def vjp(self, x, r):
        return np.zeros_like(x)


class OracleNet:
    """Predicts the exact noise draw, given the seed the step will use."""

    input_channels = 8
    meta = {}

    def __init__(self, eta):
        self.eta = eta

    def forward(self, x):
        return self.eta

    def vjp(self, x, r):
        return 7.0 * r  # any Jacobian: the residual is zero


def eta_for(seed, shape, sigma=SIGMA):
    return sigma * np.random.default_rng(seed).standard_normal((8, *shape))


def test_sigma_policy():
    assert sigma_for_acceleration(4) == 20 / 255
    assert sigma_for_acceleration(5) == 20 / 255
    assert sigma_for_acceleration(6.7) == 25 / 255


@pytest.mark.parametrize("bad", [dict(lam=-1), dict(beta=0), dict(iterations=0), dict(noise_mode="x"),
                                 dict(sigma_eta=-0.1), dict(stop_tol=-1)])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ReconConfig(**bad)


@pytest.mark.parametrize("mode", ["clean_input", "fresh_noise"])
def test_zero_network_leaves_image_unchanged(mode, rng):
    u = random_complex(rng, (8, 8))
    cfg = ReconConfig(sigma_eta=SIGMA, noise_mode=mode)
    v = prior_gradient_step(u, ZeroNet(), "haar", cfg, np.random.default_rng(0))
    np.testing.assert_array_equal(v, u)


@pytest.mark.parametrize("mode", ["clean_input", "fresh_noise"])
def test_perfect_oracle_is_a_fixed_point(mode, rng):
    u = random_complex(rng, (8, 8))
    net = OracleNet(eta_for(3, (8, 8)))
    cfg = ReconConfig(sigma_eta=SIGMA, noise_mode=mode)
    v = prior_gradient_step(u, net, "haar", cfg, np.random.default_rng(3))
    np.testing.assert_array_equal(v, u)


def test_gaussian_surrogate_clean_input_closed_form(rng):
    u = random_complex(rng, (16, 16))
    prior = GaussianSurrogatePrior(SIGMA, variance=0.3)
    a = prior.gain
    eta = eta_for(9, u.shape)
    v = prior_gradient_step(u, prior, "db4", ReconConfig(sigma_eta=SIGMA, noise_mode="clean_input"),
                            np.random.default_rng(9))
    # r = a W u - eta and J^T r = a r, so v = u - a^2 u + a W^T eta
    expected = u - a**2 * u + a * uwt_inverse(eta, "db4")
    np.testing.assert_allclose(v, expected, atol=1e-12)


def test_gaussian_surrogate_fresh_noise_closed_form(rng):
    u = random_complex(rng, (16, 16))
    prior = GaussianSurrogatePrior(SIGMA, variance=0.3)
    a = prior.gain
    eta = eta_for(9, u.shape)
    v = prior_gradient_step(u, prior, "haar", ReconConfig(sigma_eta=SIGMA), np.random.default_rng(9))
    expected = u - a**2 * u + a * (1 - a) * uwt_inverse(eta, "haar")
    np.testing.assert_allclose(v, expected, atol=1e-12)


def test_gaussian_surrogate_shrinks_toward_mean(rng):
    u = random_complex(rng, (16, 16)) * 5
    prior = GaussianSurrogatePrior(1.0, variance=1.0)  # gain 1/2
    # a vanishing draw leaves the pure shrinkage v = u - W^T(a^2 W u) = (1 - a^2) u
    cfg = ReconConfig(sigma_eta=1e-300, noise_mode="clean_input")
    v = prior_gradient_step(u, prior, filter_bank("haar"), cfg, np.random.default_rng(0))
    np.testing.assert_allclose(v, 0.75 * u, atol=1e-12)


def test_prior_step_shape_errors():
    with pytest.raises(ShapeError):
        prior_gradient_step(np.zeros((2, 4, 4)), ZeroNet(), "haar", ReconConfig(sigma_eta=0.1),
                            np.random.default_rng(0))
    with pytest.raises(ConfigError):
        prior_gradient_step(np.zeros((4, 4)), ZeroNet(), "haar", ReconConfig(), np.random.default_rng(0))


def test_data_consistency_full_mask():
    u = make_phantom((16, 16), seed=1)
    full = np.ones((16, 16), bool)
    assert np.max(np.abs(data_consistency(u, encode(u, full), full, 1.0) - u)) < 1e-12


def test_data_consistency_lambda_zero_fixed_point(rng):
    m = mask_radial(32, 32, 4, seed=0)
    f = encode(random_complex(rng, (32, 32)), m)
    zf = zero_filled(f, m)
    assert np.max(np.abs(data_consistency(zf, f, m, 0.0) - zf)) < 1e-12


@pytest.mark.parametrize("lam", [0.01, 0.5, 10.0])
def test_data_consistency_normal_equations(lam, rng):
    m = mask_random2d(32, 32, 3, seed=2)
    f = encode(random_complex(rng, (32, 32)), m)
    v = random_complex(rng, (32, 32))
    u = data_consistency(v, f, m, lam)
    residual = zero_filled(encode(u, m), m) + lam * u - zero_filled(f, m) - lam * v
    assert np.max(np.abs(residual)) < 1e-10


def test_data_consistency_per_frequency_formula(rng):
    m = mask_random2d(16, 16, 3, seed=2)
    f = encode(random_complex(rng, (16, 16)), m)
    v = random_complex(rng, (16, 16))
    for lam in (1e-6, 1e6):
        uk = fft2_unitary(data_consistency(v, f, m, lam))
        vk = fft2_unitary(v)
        s = m.samples
        # unsampled frequencies always copy v
        assert np.max(np.abs(uk[~s] - vk[~s])) < 1e-12
        # sampled frequencies sit between f and v_hat at the lam/(1+lam) point
        np.testing.assert_allclose(uk[s], (f[s] + lam * vk[s]) / (1 + lam), rtol=1e-12, atol=1e-12)


def test_data_consistency_errors(rng):
    m = np.ones((4, 4), bool)
    with pytest.raises(ShapeError):
        data_consistency(np.zeros((4, 5)), np.zeros((4, 4)), m, 1.0)
    with pytest.raises(ConfigError):
        data_consistency(np.zeros((4, 4)), np.zeros((4, 4)), m, -1.0)


def test_lambda_zero_reconstruction_is_zero_filled(rng):
    m = mask_radial(32, 32, 4, seed=1)
    f = encode(make_phantom((32, 32), seed=2), m)
    res = reconstruct(f, m, None, ReconConfig(lam=0.0, iterations=10, stop_tol=0.0, sigma_eta=0.1))
    assert res.iterations_run == 10 and len(res.trace) == 10
    np.testing.assert_array_equal(res.image, zero_filled(f, m))
    assert all(t.rel_change == 0.0 for t in res.trace)


def test_full_mask_zero_network_recovers_truth():
    truth = make_phantom((16, 16), seed=4)
    full = np.ones((16, 16), bool)
    res = reconstruct(encode(truth, full), full, ZeroNet(), ReconConfig(lam=0.5, iterations=3, sigma_eta=0.1))
    np.testing.assert_allclose(res.image, truth, atol=1e-12)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_geometric_contraction_with_zero_network(lam, rng):
    """With a zero prior each iteration contracts the sampled-frequency error by lam / (1 + lam)."""
    truth = make_phantom((16, 16), seed=4)
    m = np.random.default_rng(1).random((16, 16)) < 0.5
    f = encode(truth, m)
    start = random_complex(rng, (16, 16))
    err0 = (fft2_unitary(start) - fft2_unitary(truth))[m]
    u = start
    for k in range(1, 6):
        u = data_consistency(prior_gradient_step(u, ZeroNet(), "haar", ReconConfig(sigma_eta=0.1),
                                                 np.random.default_rng(k)), f, m, lam)
        err = (fft2_unitary(u) - fft2_unitary(truth))[m]
        np.testing.assert_allclose(err, (lam / (1 + lam)) ** k * err0, rtol=1e-9, atol=1e-12)


def test_reconstruct_is_deterministic_and_traces(rng):
    truth = make_phantom((32, 32), seed=3)
    m = mask_radial(32, 32, 3, seed=0)
    f = encode(truth, m)
    net = build_network(Architecture(width=4), seed=0)
    cfg = ReconConfig(lam=0.1, iterations=4, sigma_eta=0.05, stop_tol=0)
    a = reconstruct(f, m, net, cfg, reference=truth)
    b = reconstruct(f, m, net, cfg, reference=truth)
    np.testing.assert_array_equal(a.image, b.image)
    assert a.trace == b.trace
    assert [t.k for t in a.trace] == [1, 2, 3, 4]
    assert all(np.isfinite(t.rel_change) and t.psnr is not None for t in a.trace)
    lines = a.trace_csv().splitlines()
    assert lines[0] == "iteration,rel_change,psnr,ssim,hfen" and len(lines) == 5


def test_early_stop_triggers_on_threshold():
    m = np.ones((8, 8), bool)
    f = encode(make_phantom((8, 8), seed=0), m)
    res = reconstruct(f, m, ZeroNet(), ReconConfig(lam=1.0, iterations=50, stop_tol=1e-3, sigma_eta=0.1))
    assert res.converged and res.iterations_run < 50
    assert res.trace[-1].rel_change < 1e-3
    assert all(t.rel_change >= 1e-3 for t in res.trace[:-1])


def test_sigma_resolution_and_warning():
    m = np.ones((8, 8), bool)
    f = encode(make_phantom((8, 8), seed=0), m)
    net = ZeroNet()
    net.meta = {"sigma_eta": 0.2}
    assert reconstruct(f, m, net, ReconConfig(iterations=1)).sigma_eta == 0.2
    with pytest.warns(UserWarning, match="trained at sigma_eta"):
        res = reconstruct(f, m, net, ReconConfig(iterations=1, sigma_eta=0.1))
    assert res.sigma_eta == 0.1
    bare = ZeroNet()
    bare.meta = {}
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert reconstruct(f, mask_random2d(8, 8, 6.7, seed=0, center_fraction=0), bare,
                           ReconConfig(iterations=1)).sigma_eta == 25 / 255


def test_reconstruct_shape_errors():
    with pytest.raises(ShapeError):
        reconstruct(np.zeros((4, 4)), np.ones((4, 5), bool), ZeroNet(), ReconConfig(sigma_eta=0.1))
    with pytest.raises(ShapeError):
        reconstruct(np.zeros((4, 4)), np.ones((4, 4), bool), ZeroNet(), ReconConfig(sigma_eta=0.1),
                    reference=np.zeros((3, 3)))


def test_estimator_wrapper(rng):
    truth = make_phantom((16, 16), seed=3)
    m = np.random.default_rng(0).random((16, 16)) < 0.5
    f = encode(truth, m)
    rec = WDAEPRec(prior=ZeroNet(), lam=0.5, iterations=3, sigma_eta=0.1, stop_tol=0)
    assert rec.get_params()["lam"] == 0.5
    rec.fit(f, m, reference=truth)
    assert rec.n_iter_ == 3 and rec.image_.shape == (16, 16)
    assert clone(rec).get_params()["iterations"] == 3
    with pytest.raises(ConfigError):
        WDAEPRec(prior=None, lam=0.1).fit(f, m)
    zf = WDAEPRec(prior=None, lam=0.0, iterations=2).reconstruct(f, m)
    np.testing.assert_array_equal(zf.image, zero_filled(f, m))
