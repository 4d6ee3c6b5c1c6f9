import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import RHO_STAR_REF, bisection_root, complex_step, observed_order
from tumorstrip.core import REFERENCE_PARAMS, ModelParameters
from tumorstrip.errors import AlphaOutOfRange, BracketNotFound, DomainError
from tumorstrip.stationary import (
    f_alpha,
    f_alpha_prime,
    make_state,
    p_star,
    p_star_prime,
    sigma_star,
    solve_rho_star,
    state_at_height,
)


@st.composite
def valid_params(draw, alpha_lo=2.05, alpha_hi=20.0):
    st_ = draw(st.floats(0.1, 5.0))
    alpha = draw(st.floats(alpha_lo, alpha_hi))
    frac = draw(st.floats(0.05, 0.95))
    total = alpha * st_
    # both boundary concentrations above the threshold
    spare = total - 2 * st_
    s1 = st_ + frac * spare
    s2 = total - s1
    return ModelParameters(
        mu=draw(st.floats(0.1, 5.0)), sigma_tilde=st_, sigma_bar_1=s1, sigma_bar_2=s2, gamma=draw(st.floats(0.01, 5.0))
    )


def test_reference_root(state):
    assert state.rho_star == pytest.approx(RHO_STAR_REF, rel=1e-14)
    assert state.f_alpha_residual() <= 1e-12


def test_f_alpha_matches_naive_form():
    x = np.linspace(0.01, 30, 200)
    naive = 5 * (1 - np.cosh(x)) + x * np.sinh(x)
    np.testing.assert_allclose(f_alpha(5.0, x), naive, rtol=1e-9, atol=1e-12)


def test_f_alpha_small_x_keeps_relative_accuracy():
    # f_alpha(x) = (1 - alpha/2) x^2 + O(x^4)
    x = 1e-6
    assert f_alpha(5.0, x) == pytest.approx(-1.5 * x * x, rel=1e-6)


def test_f_alpha_prime_by_complex_step():
    x = np.linspace(0.1, 10, 25)
    fd = np.array([complex_step(lambda z: 5 * (1 - np.cosh(z)) + z * np.sinh(z), xi) for xi in x])
    np.testing.assert_allclose(f_alpha_prime(5.0, x), fd, rtol=1e-12)


@given(valid_params())
def test_root_agrees_with_bisection_oracle(p):
    rho = solve_rho_star(p)
    assert rho == pytest.approx(bisection_root(p.alpha()), rel=1e-10)


@given(valid_params())
def test_root_is_the_only_sign_change(p):
    rho = solve_rho_star(p)
    a = p.alpha()
    x = np.linspace(1e-3, 60, 4000)
    fx = f_alpha(a, x)
    assert np.all(fx[x < rho * (1 - 1e-6)] < 0)
    assert np.all(fx[x > rho * (1 + 1e-6)] > 0)


@given(valid_params())
def test_flat_state_boundary_conditions(p):
    s = make_state(p)
    r = s.rho_star
    assert sigma_star(s, 0.0) == pytest.approx(p.sigma_bar_1, rel=1e-12)
    assert sigma_star(s, r) == pytest.approx(p.sigma_bar_2, rel=1e-12)
    assert abs(p_star(s, r)) <= 1e-10 * p.mu * (p.sigma_bar_2 + p.sigma_tilde * r * r)
    scale = p.mu * (abs(s.c1) + abs(s.c3) + p.sigma_tilde * r)
    assert abs(p_star_prime(s, 0.0)) <= 1e-12 * scale
    assert abs(p_star_prime(s, r)) <= 1e-10 * scale
    # the alternative form cancels terms of size cosh(rho)
    assert abs(s.c3 - s.c3_alt) <= 1e-14 * math.cosh(r) * (abs(s.c1) + s.c2)
    assert s.c3 == pytest.approx(s.c1 + p.sigma_tilde * r, rel=1e-9, abs=1e-12)


def test_equilibrium_slope_by_complex_step(state):
    # independent derivative of the closed-form pressure at the surface
    d = complex_step(lambda z: p_star(state, z), state.rho_star - 1e-300)
    assert abs(d) <= 1e-10


def test_pressure_linear_coefficient_uses_sinh(state):
    # with sin in the denominator p*'(0) would not vanish
    r = state.rho_star
    p = state.params
    wrong = (p.sigma_bar_2 - p.sigma_bar_1 * math.cosh(r)) / math.sin(r)
    assert abs(wrong - state.c1) > 1.0
    assert abs(complex_step(lambda z: p_star(state, z), 0.0)) < 1e-12


def _residual_orders(state):
    p = state.params
    r = state.rho_star
    hs = np.array([r / n for n in (40, 80, 160, 320)])
    y0 = 0.37 * r
    res = {"sigma_ode": [], "p_ode": [], "p'(0)": [], "p'(rho)": []}
    for h in hs:
        s = [sigma_star(state, y0 + i * h) for i in (-1, 0, 1)]
        q = [p_star(state, y0 + i * h) for i in (-1, 0, 1)]
        res["sigma_ode"].append(abs((s[0] - 2 * s[1] + s[2]) / h**2 - s[1]))
        res["p_ode"].append(abs((q[0] - 2 * q[1] + q[2]) / h**2 + p.mu * (s[1] - p.sigma_tilde)))
        b = [p_star(state, i * h) for i in range(3)]
        res["p'(0)"].append(abs((-3 * b[0] + 4 * b[1] - b[2]) / (2 * h)))
        t = [p_star(state, r - i * h) for i in range(3)]
        res["p'(rho)"].append(abs((3 * t[0] - 4 * t[1] + t[2]) / (2 * h)))
    return hs, {k: observed_order(v, hs) for k, v in res.items()}


def test_closed_forms_satisfy_odes_at_second_order(state):
    _, orders = _residual_orders(state)
    for name, order in orders.items():
        assert 1.8 <= order <= 2.2, (name, order)


@pytest.mark.parametrize("y", [-1.0, 10.0, [0.5, 5.0]])
def test_domain_is_enforced(state, y):
    with pytest.raises(DomainError):
        sigma_star(state, y)
    with pytest.raises(DomainError):
        p_star(state, y)


def test_vectorised_and_complex_input(state):
    y = np.linspace(0, state.rho_star, 7)
    assert sigma_star(state, y).shape == (7,)
    z = sigma_star(state, np.array([1.0 + 1e-20j]))
    assert z.dtype == complex


def test_alpha_out_of_range_raises():
    with pytest.raises(AlphaOutOfRange):
        solve_rho_star(ModelParameters(1.0, 1.0, 1.0, 1.0, 1.0))


def test_root_beyond_bracket_limit():
    # the root is close to alpha for large alpha
    p = ModelParameters(1.0, 1.0, 250.0, 250.0, 1.0)
    with pytest.raises(BracketNotFound):
        solve_rho_star(p)


def test_root_grows_with_alpha():
    alphas = (2.5, 3.0, 5.0, 10.0, 20.0)
    roots = [solve_rho_star(ModelParameters(1.0, 1.0, a / 2, a / 2, 1.0)) for a in alphas]
    assert np.all(np.diff(roots) > 0)
    assert roots[-1] == pytest.approx(20.0, rel=1e-6)


def test_state_at_height_matches_at_the_root(state):
    other = state_at_height(state.params, state.rho_star)
    assert other.c1 == pytest.approx(state.c1, rel=1e-13)
    assert other.c3 == pytest.approx(state.c3, rel=1e-13)


def test_state_at_large_height_is_finite():
    s = state_at_height(REFERENCE_PARAMS, 1000.0)
    assert math.isfinite(s.c1) and math.isfinite(s.c3)
    assert s.c1 == pytest.approx(-REFERENCE_PARAMS.sigma_bar_1)
    assert s.c3 == pytest.approx(REFERENCE_PARAMS.sigma_bar_2)
