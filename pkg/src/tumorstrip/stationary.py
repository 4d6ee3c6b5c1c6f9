"""Closed-form flat stationary state (sigma*, p*, rho*).

For flat data the nutrient and pressure depend on ``y`` only:

    sigma*'' = sigma*,            sigma*(0) = sb1, sigma*(rho*) = sb2,
    p*''     = -mu (sigma* - st), p*'(0) = 0,    p*(rho*) = 0,

and the surface is at rest when additionally ``p*'(rho*) = 0``.  That last
condition reduces to ``f_alpha(rho*) = 0`` with
``f_alpha(x) = alpha (1 - cosh x) + x sinh x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ModelParameters, validate
from .errors import BracketNotFound, DomainError

BRACKET_LIMIT = 100.0


def f_alpha(alpha: float, x):
    """Evaluate ``alpha (1 - cosh x) + x sinh x`` for ``x > 0``.

    Uses the factorisation ``e^x/2 * [x (1 - e^{-2x}) - alpha (1 - e^{-x})^2]``
    with ``expm1`` so neither the small-x limit nor the cancellation near the
    root loses relative accuracy.  Beyond ``x ~ 709`` the result is +-inf.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        bracket = -x * np.expm1(-2.0 * x) - alpha * np.expm1(-x) ** 2
        out = 0.5 * np.exp(x) * bracket
    return out[()] if out.ndim == 0 else out


def f_alpha_prime(alpha: float, x):
    x = np.asarray(x, dtype=float)
    out = np.cosh(x) * (x + (1.0 - alpha) * np.tanh(x))
    return out[()] if out.ndim == 0 else out


def _bracket(alpha: float) -> tuple[float, float]:
    hi = 1.0
    while f_alpha(alpha, hi) <= 0.0:
        hi *= 2.0
        if hi > BRACKET_LIMIT:
            raise BracketNotFound(f"no sign change of f_alpha below x = {BRACKET_LIMIT} (alpha={alpha})")
    lo = hi / 2.0
    while f_alpha(alpha, lo) >= 0.0:
        hi = lo
        lo /= 2.0
        if lo < 1e-150:
            raise BracketNotFound(f"f_alpha has no negative values near 0 (alpha={alpha})")
    return lo, hi


def solve_rho_star(params: ModelParameters) -> float:
    """Unique positive root of ``f_alpha``.

    Bisection down to a bracket of width 1e-14 (relative), then at most three
    Newton steps that are discarded if they leave the bracket.
    """
    validate(params)
    alpha = params.alpha()
    lo, hi = _bracket(alpha)
    while hi - lo > 1e-14 * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f_alpha(alpha, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(3):
        fx = f_alpha(alpha, x)
        if fx == 0.0:
            break
        x_new = x - fx / f_alpha_prime(alpha, x)
        if not lo <= x_new <= hi:
            break
        x = x_new
    return float(x)


@dataclass(frozen=True)
class FlatStationaryState:
    params: ModelParameters
    rho_star: float
    c1: float
    c2: float
    c3: float

    @property
    def c3_alt(self) -> float:
        """``c1 cosh rho* + c2 sinh rho*``, the second closed form of ``c3``."""
        r = self.rho_star
        return self.c1 * math.cosh(r) + self.c2 * math.sinh(r)

    def f_alpha_residual(self) -> float:
        return abs(float(f_alpha(self.params.alpha(), self.rho_star)))


def _constants(params: ModelParameters, height: float) -> tuple[float, float, float]:
    s1, s2 = params.sigma_bar_1, params.sigma_bar_2
    # 1/sinh and coth written with exp(-2h) so large heights do not overflow
    e = math.exp(-2.0 * height)
    inv_sinh = 2.0 * math.exp(-height) / -math.expm1(-2.0 * height)
    coth = (1.0 + e) / -math.expm1(-2.0 * height)
    c1 = s2 * inv_sinh - s1 * coth
    c3 = s2 * coth - s1 * inv_sinh
    return c1, s1, c3


def _check_domain(state: FlatStationaryState, y) -> None:
    yr = np.real(y)
    slack = 1e-12 * state.rho_star
    if np.any(yr < -slack) or np.any(yr > state.rho_star + slack):
        raise DomainError(f"y must lie in [0, rho*] = [0, {state.rho_star}]")


def sigma_star(state: FlatStationaryState, y):
    """Stationary nutrient profile; accepts scalars or arrays (complex allowed)."""
    _check_domain(state, y)
    return _sigma(state, y)


def _over_sinh(a, rho, plus: bool):
    """``sinh(a)/sinh(rho)`` (``plus=False``) or ``cosh(a)/sinh(rho)`` for
    ``0 <= Re a <= rho`` without forming the large hyperbolic values."""
    tail = np.exp(-2.0 * a)
    num = 1.0 + tail if plus else 1.0 - tail
    return np.exp(a - rho) * num / -math.expm1(-2.0 * rho)


def _sigma(state, y):
    # (sb2 sinh y + sb1 sinh(rho - y)) / sinh rho
    r = state.rho_star
    s1, s2 = state.params.sigma_bar_1, state.params.sigma_bar_2
    return s2 * _over_sinh(y, r, False) + s1 * _over_sinh(r - y, r, False)


def _sigma_prime(state, y):
    # (sb2 cosh y - sb1 cosh(rho - y)) / sinh rho
    r = state.rho_star
    s1, s2 = state.params.sigma_bar_1, state.params.sigma_bar_2
    return s2 * _over_sinh(y, r, True) - s1 * _over_sinh(r - y, r, True)


def p_star(state: FlatStationaryState, y):
    """Stationary pressure.

    The coefficient of the linear term is ``(sb2 - sb1 cosh rho*) / sinh rho*``;
    a ``sin`` in that denominator would violate ``p*'(0) = 0``.
    """
    _check_domain(state, y)
    return _pressure(state, y)


def _pressure(state, y):
    p = state.params
    r = state.rho_star
    return p.mu * state.c1 * (y - r) + p.mu * (
        p.sigma_bar_2 - _sigma(state, y) - 0.5 * p.sigma_tilde * (r**2 - y**2)
    )


def p_star_prime(state: FlatStationaryState, y):
    _check_domain(state, y)
    p = state.params
    return p.mu * (state.c1 - _sigma_prime(state, y) + p.sigma_tilde * y)


def make_state(params: ModelParameters) -> FlatStationaryState:
    """Build the flat stationary state and check that its surface is at rest."""
    rho = solve_rho_star(params)
    c1, c2, c3 = _constants(params, rho)
    state = FlatStationaryState(params, rho, c1, c2, c3)
    slope = abs(float(p_star_prime(state, rho)))
    scale = params.mu * (abs(c1) + abs(c3) + params.sigma_tilde * rho)
    if slope > 1e-10 * max(scale, 1.0):
        raise ArithmeticError(f"p*'(rho*) = {slope:.3e} is not zero; root solve is inconsistent")
    return state


def state_at_height(params: ModelParameters, height: float) -> FlatStationaryState:
    """Stationary-style constants with ``rho*`` replaced by an arbitrary height.

    Only the time stepper uses this, to freeze a Fourier symbol at the mean
    boundary height; the result is not a stationary solution unless
    ``height`` is the root of ``f_alpha``.
    """
    c1, c2, c3 = _constants(params, height)
    return FlatStationaryState(params, float(height), c1, c2, c3)
