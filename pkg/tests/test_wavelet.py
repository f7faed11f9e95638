import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from wdaep.errors import DimensionError, ShapeError, UnsupportedWavelet
from wdaep.wavelet import (
    CHANNELS,
    FilterBank,
    UndecimatedWavelet,
    available_wavelets,
    filter_bank,
    uwt_forward,
    uwt_inverse,
)

from .conftest import random_complex

BANKS = ("haar", "db4", "sym4", "coif2")


def dense_matrix(fb, h, w):
    """Columns are W applied to each complex basis image, real and imaginary."""
    cols = []
    for part in (1.0, 1j):
        for idx in range(h * w):
            e = np.zeros(h * w, dtype=complex)
            e[idx] = part
            cols.append(uwt_forward(e.reshape(h, w), fb).ravel())
    return np.array(cols).T


def test_haar_coefficients():
    fb = filter_bank("haar")
    np.testing.assert_allclose(fb.analysis_low, [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(fb.analysis_high, [0.5, -0.5], atol=1e-15)


@pytest.mark.parametrize("name", BANKS)
def test_parseval_energy_of_filters(name):
    fb = filter_bank(name)
    assert abs(fb.energy() - 1.0) < 1e-14
    assert fb.analysis_low.size == fb.analysis_high.size


@pytest.mark.parametrize("name", BANKS)
def test_lowpass_sums_to_one_highpass_to_zero(name):
    fb = filter_bank(name)
    assert abs(fb.analysis_low.sum() - 1.0) < 1e-14
    assert abs(fb.analysis_high.sum()) < 1e-14


def test_unknown_wavelet_rejected():
    with pytest.raises(UnsupportedWavelet):
        filter_bank("dmey")


def test_available_wavelets_lists_required_banks():
    assert {"haar", "db4", "sym4"} <= set(available_wavelets())


def test_filter_bank_from_mapping_and_passthrough():
    fb = filter_bank("db4")
    assert filter_bank(fb) is fb
    again = filter_bank(fb.to_dict())
    np.testing.assert_array_equal(again.analysis_low, fb.analysis_low)


def test_filter_bank_pads_shorter_filter():
    fb = FilterBank("custom", [0.5, 0.5], [0.5])
    np.testing.assert_array_equal(fb.analysis_high, [0.5, 0.0])


@pytest.mark.parametrize("bad", [[], [np.nan, 0.1]])
def test_filter_bank_rejects_bad_coefficients(bad):
    with pytest.raises(ValueError):
        FilterBank("bad", bad, [0.5, -0.5])


def test_constant_image_only_has_lowpass():
    t = uwt_forward(np.full((8, 8), 2.0 - 1.0j), "db4")
    np.testing.assert_allclose(t[0], 2.0, atol=1e-14)
    np.testing.assert_allclose(t[1], -1.0, atol=1e-14)
    np.testing.assert_allclose(t[2:], 0.0, atol=1e-14)


def test_impulse_energy_is_one():
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = 1
    assert abs(np.sum(uwt_forward(u, "haar") ** 2) - 1.0) < 1e-15


def test_channel_layout():
    assert CHANNELS == ("LL_re", "LL_im", "LH_re", "LH_im", "HL_re", "HL_im", "HH_re", "HH_im")
    # a pattern varying only along rows (axis -1) lands in the HL band
    u = np.tile([1.0, -1.0], (4, 2)).astype(complex)
    t = uwt_forward(u, "haar")
    assert np.abs(t[4]).max() > 0.5
    np.testing.assert_allclose(t[[0, 2, 6]], 0.0, atol=1e-15)


@pytest.mark.parametrize("name", BANKS)
def test_perfect_reconstruction(name, rng):
    u = random_complex(rng, (16, 24))
    assert np.max(np.abs(uwt_inverse(uwt_forward(u, name), name) - u)) < 1e-10


def test_db4_matches_dense_matrix(rng):
    fb = filter_bank("db4")
    h = w = 8
    W = dense_matrix(fb, h, w)
    u = random_complex(rng, (h, w))
    x = np.concatenate([u.real.ravel(), u.imag.ravel()])
    np.testing.assert_allclose(W.real @ x, uwt_forward(u, fb).ravel(), atol=1e-12)
    # W^T W = I on the real representation
    np.testing.assert_allclose(W.real.T @ W.real, np.eye(2 * h * w), atol=1e-12)
    t = rng.standard_normal((8, h, w))
    back = W.real.T @ t.ravel()
    np.testing.assert_allclose(uwt_inverse(t, fb), back[: h * w].reshape(h, w) + 1j * back[h * w :].reshape(h, w),
                               atol=1e-12)


@pytest.mark.parametrize("name", BANKS)
def test_adjoint_identity(name, rng):
    u = random_complex(rng, (12, 16))
    t = rng.standard_normal((8, 12, 16))
    lhs = np.sum(uwt_forward(u, name) * t)
    rhs = np.sum(u.real * uwt_inverse(t, name).real + u.imag * uwt_inverse(t, name).imag)
    assert abs(lhs - rhs) < 1e-10


def test_zero_tensor_inverts_to_zero():
    np.testing.assert_array_equal(uwt_inverse(np.zeros((8, 5, 5)), "haar"), 0)


def test_batched_matches_single(rng):
    u = random_complex(rng, (3, 10, 10))
    batch = uwt_forward(u, "sym4")
    assert batch.shape == (3, 8, 10, 10)
    for i in range(3):
        np.testing.assert_array_equal(batch[i], uwt_forward(u[i], "sym4"))
    np.testing.assert_allclose(uwt_inverse(batch, "sym4"), u, atol=1e-12)


def test_image_smaller_than_filter():
    with pytest.raises(DimensionError):
        uwt_forward(np.zeros((6, 6)), "db4")


def test_wrong_channel_count():
    with pytest.raises(ShapeError):
        uwt_inverse(np.zeros((7, 4, 4)), "haar")


def test_wrong_rank():
    with pytest.raises(ShapeError):
        uwt_forward(np.zeros(16), "haar")


@settings(max_examples=25, deadline=None)
@given(
    name=st.sampled_from(BANKS),
    h=st.integers(12, 24),
    w=st.integers(12, 24),
    dy=st.integers(-5, 5),
    dx=st.integers(-5, 5),
    seed=st.integers(0, 2**32 - 1),
    a=st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
)
def test_linearity_and_shift_covariance(name, h, w, dy, dx, seed, a):
    rng = np.random.default_rng(seed)
    u, v = random_complex(rng, (h, w)), random_complex(rng, (h, w))
    # complex scalars mix re/im channels, so check linearity over reals and i separately
    for c in (a.real, a.imag):
        np.testing.assert_allclose(uwt_forward(c * u + v, name), c * uwt_forward(u, name) + uwt_forward(v, name),
                                   atol=1e-10)
    shifted = uwt_forward(np.roll(u, (dy, dx), axis=(0, 1)), name)
    np.testing.assert_allclose(shifted, np.roll(uwt_forward(u, name), (dy, dx), axis=(1, 2)), atol=1e-12)
    assert abs(np.linalg.norm(uwt_forward(u, name)) - np.linalg.norm(u)) < 1e-10


def test_transformer_api(rng):
    est = UndecimatedWavelet("db4")
    assert est.get_params() == {"wavelet": "db4"}
    u = random_complex(rng, (16, 16))
    est.fit(u)
    assert est.filter_bank_.name == "db4"
    np.testing.assert_allclose(est.inverse_transform(est.transform(u)), u, atol=1e-12)
    twin = clone(est)
    assert twin.wavelet == "db4" and not hasattr(twin, "filter_bank_")
