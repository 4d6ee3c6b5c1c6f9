import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tumorstrip.core import (
    REFERENCE_PARAMS,
    BoundaryProfile,
    FourierCoeffs,
    ModelParameters,
    PeriodicGrid,
    StripField,
    coeffs_from_samples,
    fourier_diff_matrix,
    from_fourier,
    periodic_derivative,
    samples_from_coeffs,
    spectral_derivative,
    to_fourier,
    validate,
)
from tumorstrip.errors import AlphaOutOfRange, GridMismatch, NonPositiveParameter, NonPositiveProfile


def test_alpha_of_reference_parameters():
    assert REFERENCE_PARAMS.alpha() == 5.0
    assert validate(REFERENCE_PARAMS) is REFERENCE_PARAMS


@pytest.mark.parametrize("field", ["mu", "sigma_tilde", "sigma_bar_1", "sigma_bar_2", "gamma"])
@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_validate_rejects_non_positive(field, bad):
    with pytest.raises(NonPositiveParameter):
        validate(REFERENCE_PARAMS.replace(**{field: bad}))


@pytest.mark.parametrize("s1,s2", [(1.0, 1.0), (0.5, 1.2), (1.0, 0.9)])
def test_validate_rejects_alpha_at_most_two(s1, s2):
    with pytest.raises(AlphaOutOfRange):
        validate(ModelParameters(1.0, 1.0, s1, s2, 1.0))


def test_alpha_out_of_range_is_a_value_error():
    assert issubclass(AlphaOutOfRange, ValueError)


@pytest.mark.parametrize("nx", [7, 6, 9, 0])
def test_grid_rejects_bad_sizes(nx):
    with pytest.raises(ValueError):
        PeriodicGrid(nx)


def test_grid_nodes():
    g = PeriodicGrid(16)
    assert g.x[0] == 0.0 and g.x.size == 16
    assert g.h == pytest.approx(2 * math.pi / 16)
    assert g.k_rep == 7


def test_profile_positivity_and_shape():
    g = PeriodicGrid(8)
    with pytest.raises(NonPositiveProfile):
        BoundaryProfile(g, np.r_[np.ones(7), 0.0])
    with pytest.raises(GridMismatch):
        BoundaryProfile(g, np.ones(9))
    p = BoundaryProfile.flat(2.0, g)
    with pytest.raises(ValueError):
        p.values[0] = 3.0


def test_strip_field_shape():
    g = PeriodicGrid(8)
    f = StripField.from_function(lambda x, y: np.cos(x) * y, g, 4)
    assert f.values.shape == (8, 5)
    assert f.y[-1] == 1.0
    with pytest.raises(GridMismatch):
        StripField(g, 4, np.zeros((8, 4)))


@given(
    nx=st.sampled_from([8, 16, 32, 64]),
    seed=st.integers(0, 2**32 - 1),
)
def test_fourier_round_trip(nx, seed):
    rng = np.random.default_rng(seed)
    v = 3.0 + rng.uniform(-1, 1, nx)
    g = PeriodicGrid(nx)
    p = BoundaryProfile(g, v)
    back = from_fourier(to_fourier(p), g)
    np.testing.assert_allclose(back.values, v, rtol=0, atol=1e-13)
    c = to_fourier(p)
    assert c.mean_square() == pytest.approx(np.mean(v**2), rel=1e-13)


@pytest.mark.parametrize("k", [1, 3, 7])
def test_single_mode_coefficients(k):
    g = PeriodicGrid(16)
    v = 2.0 + 0.3 * np.cos(k * g.x) - 0.2 * np.sin(k * g.x)
    c = coeffs_from_samples(v)
    assert c.mode(0) == pytest.approx((2.0, 0.0))
    a, b = c.mode(k)
    assert a == pytest.approx(0.3, abs=1e-14)
    assert b == pytest.approx(-0.2, abs=1e-14)
    others = np.delete(np.hypot(c.a, c.b), k - 1)
    assert np.max(others) < 1e-14
    np.testing.assert_allclose(
        samples_from_coeffs(FourierCoeffs.single_mode(k, 16, 2.0, 0.3, -0.2), 16), v, atol=1e-14
    )


def test_from_fourier_rejects_negative():
    c = FourierCoeffs.single_mode(1, 8, a0=0.1, ak=1.0)
    with pytest.raises(NonPositiveProfile):
        from_fourier(c, PeriodicGrid(8))


def test_coefficient_count_must_match_grid():
    with pytest.raises(GridMismatch):
        samples_from_coeffs(FourierCoeffs.single_mode(1, 8), 16)


@pytest.mark.parametrize("k", [1, 2, 5, 7])
def test_spectral_derivatives_of_trig_modes(k):
    g = PeriodicGrid(16)
    p = BoundaryProfile(g, 3.0 + np.sin(k * g.x))
    np.testing.assert_allclose(spectral_derivative(p, 1), k * np.cos(k * g.x), atol=1e-12)
    np.testing.assert_allclose(spectral_derivative(p, 2), -(k**2) * np.sin(k * g.x), atol=1e-11)


def test_nyquist_has_no_odd_derivative():
    g = PeriodicGrid(8)
    saw = np.cos(4 * g.x)
    assert np.max(np.abs(periodic_derivative(saw, 1))) < 1e-14
    np.testing.assert_allclose(periodic_derivative(saw, 2), -16 * saw, atol=1e-12)


def test_spectral_derivative_of_smooth_function_is_spectrally_accurate():
    g = PeriodicGrid(32)
    v = np.exp(np.sin(g.x))
    d = periodic_derivative(v, 1)
    np.testing.assert_allclose(d, np.cos(g.x) * v, atol=1e-10)


def test_diff_matrix_matches_transform():
    rng = np.random.default_rng(3)
    v = rng.normal(size=16)
    for order in (1, 2):
        np.testing.assert_allclose(fourier_diff_matrix(16, order) @ v, periodic_derivative(v, order), atol=1e-12)


def test_spectral_derivative_order_argument():
    p = BoundaryProfile.flat(1.0, PeriodicGrid(8))
    with pytest.raises(ValueError):
        spectral_derivative(p, 3)
