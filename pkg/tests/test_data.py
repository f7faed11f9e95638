import numpy as np
import pytest

from wdaep.data import Ellipse, extract_patches, make_phantom, make_phantom_set, training_patches
from wdaep.errors import ConfigError, ShapeError
from wdaep.wavelet import uwt_forward


def test_phantom_is_deterministic():
    np.testing.assert_array_equal(make_phantom((32, 40), seed=3), make_phantom((32, 40), seed=3))
    assert not np.array_equal(make_phantom((32, 40), seed=3), make_phantom((32, 40), seed=4))


def test_centered_disk_has_constant_magnitude():
    u = make_phantom((64, 64), ellipses=[Ellipse(0.0, 0.0, 0.5, 0.5)], phase_scale=0)
    inside = np.abs(u) > 0
    assert np.all(np.abs(u[inside]) == 1.0)
    assert np.all(u.imag == 0)
    # the disk covers about pi * 0.25^2 of the image
    assert abs(inside.mean() - np.pi / 16) < 0.01
    np.testing.assert_array_equal(inside, inside[::-1, ::-1])


def test_phantom_set_magnitudes_peak_at_one():
    for u in make_phantom_set(100, (32, 32), seed=5):
        assert abs(np.abs(u).max() - 1.0) < 1e-12
        assert np.all(np.isfinite(u))


def test_phase_is_wrapped():
    u = make_phantom((48, 48), seed=1, phase_scale=5.0)
    phase = np.angle(u[np.abs(u) > 0])
    assert np.all(phase > -np.pi) and np.all(phase <= np.pi)
    assert phase.std() > 0.1


def test_phantom_set_is_seeded():
    a = make_phantom_set(3, (24, 24), seed=9)
    b = make_phantom_set(3, (24, 24), seed=9)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert not np.array_equal(a[0], a[1])


def test_phantom_contracts():
    with pytest.raises(ConfigError):
        make_phantom((16, 16), n_ellipses=0)
    with pytest.raises(ConfigError):
        make_phantom((16, 16), ellipses=[])


def test_patch_grid_count_and_content(rng):
    t = rng.standard_normal((8, 64, 64))
    p = extract_patches(t, 40, 8)
    assert p.shape == (16, 8, 40, 40)
    np.testing.assert_array_equal(p[0], t[:, :40, :40])
    np.testing.assert_array_equal(p[5], t[:, 8:48, 8:48])
    np.testing.assert_array_equal(p[-1], t[:, 24:, 24:])


def test_patch_equal_to_image(rng):
    t = rng.standard_normal((2, 8, 12, 12))
    p = extract_patches(t, 12, 5)
    np.testing.assert_array_equal(p, t)


def test_patch_shuffle_and_truncate(rng):
    t = rng.standard_normal((8, 20, 20))
    full = extract_patches(t, 4, 4)
    sub = extract_patches(t, 4, 4, max_count=7, seed=1)
    assert sub.shape == (7, 8, 4, 4)
    for s in sub:
        assert any(np.array_equal(s, f) for f in full)
    np.testing.assert_array_equal(sub, extract_patches(t, 4, 4, max_count=7, seed=1))


def test_patch_contracts(rng):
    t = rng.standard_normal((8, 16, 16))
    with pytest.raises(ConfigError):
        extract_patches(t, 17, 1)
    with pytest.raises(ConfigError):
        extract_patches(t, 4, 0)
    with pytest.raises(ShapeError):
        extract_patches(t[0], 4, 1)


def test_training_patches_come_from_whole_image_transform():
    ims = make_phantom_set(2, (32, 32), seed=0)
    p = training_patches(ims, "haar", patch=16, stride=16, seed=None)
    assert p.shape == (8, 8, 16, 16)
    np.testing.assert_array_equal(p[0], uwt_forward(ims[0], "haar")[:, :16, :16])
