"""Sensitivity map and perceptual distance tests against scalar oracles."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import reference
from advcraft.errors import ConfigError
from advcraft.perception import (
    DEFAULT_SD_FLOOR,
    perceptual_distance,
    sd_map,
    sensitivity_map,
)

images = hnp.arrays(
    np.float64,
    st.tuples(st.integers(3, 7), st.integers(3, 7), st.integers(1, 2)),
    elements=st.floats(0, 1, allow_nan=False),
)


def test_constant_image_sd_zero_sen_capped():
    image = np.full((5, 5, 1), 0.4)
    assert np.abs(sd_map(image)).max() <= 1e-12
    sen = sensitivity_map(image)
    # any residual rounding noise sits far below the floor, so the cap is exact
    assert np.array_equal(sen.values, np.full((5, 5, 1), 1.0 / DEFAULT_SD_FLOOR))


def test_interior_window_sd_known_value():
    # 3x3 window holding eight 0s and one 1: mean 1/9, var 8/81.
    image = np.zeros((5, 5, 1))
    image[2, 2, 0] = 1.0
    sd = sd_map(image)
    assert sd[2, 2, 0] == pytest.approx(math.sqrt(8.0 / 81.0), rel=1e-12)


def test_sd_matches_scalar_oracle():
    rng = np.random.default_rng(12)
    for shape in ((6, 6, 1), (5, 7, 3), (3, 3, 2)):
        image = rng.random(shape)
        np.testing.assert_allclose(sd_map(image), reference.window_sd(image, 3), atol=1e-12)


def test_edge_windows_use_actual_count():
    # corner of a 4x4: window is 2x2; verify against the oracle explicitly
    rng = np.random.default_rng(13)
    image = rng.random((4, 4, 1))
    sd = sd_map(image)
    vals = image[:2, :2, 0].ravel()
    want = math.sqrt(((vals - vals.mean()) ** 2).mean())
    assert sd[0, 0, 0] == pytest.approx(want, rel=1e-12)


def test_window_size_validation():
    image = np.zeros((5, 5, 1))
    for bad in (2, 4, 1, -3):
        with pytest.raises(ConfigError):
            sd_map(image, bad)
    with pytest.raises(ConfigError):
        sd_map(np.zeros((5, 5)))


def test_sen_floor_validation():
    with pytest.raises(ConfigError):
        sensitivity_map(np.zeros((5, 5, 1)), sd_floor=0.0)


@given(images)
def test_sen_anti_monotone_and_capped(image):
    sen = sensitivity_map(image)
    sd = sd_map(image)
    cap = 1.0 / DEFAULT_SD_FLOOR
    assert (sen.values <= cap + 1e-12).all()
    assert (sen.values > 0).all()
    # anti-monotone: larger sd gives no larger sen
    flat_sd, flat_sen = sd.ravel(), sen.values.ravel()
    order = np.argsort(flat_sd)
    assert (np.diff(flat_sen[order]) <= 1e-12).all()


def test_distance_zero_on_identity_and_linear_scaling():
    rng = np.random.default_rng(14)
    image = rng.random((6, 6, 1))
    sen = sensitivity_map(image)
    assert perceptual_distance(image, image, sen) == 0.0
    delta = rng.random((6, 6, 1)) * 0.1
    d1 = perceptual_distance(image, image + delta, sen)
    d2 = perceptual_distance(image, image + 2 * delta, sen)
    assert d2 == pytest.approx(2 * d1, rel=1e-12)


def test_distance_matches_scalar_oracle():
    rng = np.random.default_rng(15)
    image = rng.random((5, 5, 2))
    cand = np.clip(image + 0.3 * rng.standard_normal(image.shape), 0, 1)
    sen = sensitivity_map(image)
    want = reference.perceptual_distance(image, cand, sen.values)
    assert perceptual_distance(image, cand, sen) == pytest.approx(want, rel=1e-12)


def test_distance_shape_mismatch_rejected():
    image = np.zeros((4, 4, 1))
    sen = sensitivity_map(image)
    with pytest.raises(ConfigError):
        perceptual_distance(image, np.zeros((5, 5, 1)), sen)


def test_single_perturbed_element_worked_example():
    # delta 0.2 on a pixel whose sen is the floor cap: D = 0.2 * 100
    image = np.full((5, 5, 1), 0.5)
    sen = sensitivity_map(image)
    cand = image.copy()
    cand[2, 2, 0] += 0.2
    assert perceptual_distance(image, cand, sen) == pytest.approx(20.0, rel=1e-12)
