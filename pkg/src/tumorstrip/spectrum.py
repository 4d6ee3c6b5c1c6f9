"""Fourier-multiplier spectrum of the linearisation at the flat state.

The linearised boundary operator acts diagonally on ``cos(kx), sin(kx)`` with

    lambda_k = mu c3 s [coth(rho s) - 1 / (sinh(rho s) cosh(rho k))]
               + (gamma k^2 - mu st rho - mu c1) k tanh(rho k) + mu (st - sb2),

``s = sqrt(1 + k^2)``, ``rho = rho*``.  Perturbations then evolve as
``r_t = -lambda_k r`` in each mode.

Besides the closed form this module carries an independent route to the same
numbers: the two-point boundary value problems for the modal nutrient and
pressure corrections are solved by finite differences and ``lambda_k`` is
read off the pressure flux at the surface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .stationary import FlatStationaryState
from .errors import SingularSystem, ToleranceNotReached

K_ORACLE = 16
_LARGE = 30.0


def _coth(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        return np.where(z > _LARGE, 1.0, 1.0 / np.tanh(np.minimum(z, _LARGE)))


def _inv_sinh_cosh(a, b):
    """``1 / (sinh a cosh b)`` for ``a > 0, b >= 0`` without overflow."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 4.0 * np.exp(-a - b) / (-np.expm1(-2.0 * a) * (1.0 + np.exp(-2.0 * b)))


def lambda_k(state: FlatStationaryState, gamma: float, k):
    """Eigenvalue of mode ``k`` (scalar or array of non-negative integers)."""
    p = state.params
    rho = state.rho_star
    k = np.asarray(k, dtype=float)
    s = np.sqrt(1.0 + k**2)
    first = p.mu * state.c3 * s * (_coth(rho * s) - _inv_sinh_cosh(rho * s, rho * k))
    second = (gamma * k**2 - p.mu * p.sigma_tilde * rho - p.mu * state.c1) * k * np.tanh(rho * k)
    out = first + second + p.mu * (p.sigma_tilde - p.sigma_bar_2)
    return out[()] if out.ndim == 0 else out


def lambda_k_naive(state: FlatStationaryState, gamma: float, k):
    """The eigenvalue formula transcribed literally; overflows for ``rho k > ~350``."""
    p = state.params
    r = state.rho_star
    k = np.asarray(k, dtype=float)
    s = np.sqrt(1.0 + k**2)
    sb1, sb2 = p.sigma_bar_1, p.sigma_bar_2
    first = (
        p.mu * (sb2 * np.cosh(r) - sb1) * s
        / (np.sinh(r) * np.sinh(r * s) * np.cosh(r * k))
        * (np.cosh(r * s) * np.cosh(r * k) - 1.0)
    )
    second = (gamma * k**2 - p.mu * p.sigma_tilde * r - p.mu * (sb2 - sb1 * np.cosh(r)) / np.sinh(r)) * k * np.tanh(r * k)
    out = first + second + p.mu * (p.sigma_tilde - sb2)
    return out[()] if out.ndim == 0 else out


def lambda_0_reduced(state: FlatStationaryState) -> float:
    """``mu st (1 - rho*/sinh rho*)``, positive for every admissible state."""
    p = state.params
    r = state.rho_star
    return p.mu * p.sigma_tilde * (1.0 - r / math.sinh(r))


def tail_ratio(state: FlatStationaryState, gamma: float, k):
    """``lambda_k / (k^3 tanh(rho* k))``; tends to ``gamma`` as ``k`` grows."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ValueError("tail_ratio needs k >= 1")
    out = lambda_k(state, gamma, k) / (k**3 * np.tanh(state.rho_star * k))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class SpectrumReport:
    params: object
    rho_star: float
    gamma: float
    k_max: int
    lambdas: np.ndarray
    oracle_lambdas: Optional[np.ndarray] = None

    @property
    def min_lambda(self) -> float:
        return float(np.min(self.lambdas))

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.lambdas))

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.lambdas > 0))


def spectrum(state: FlatStationaryState, gamma: float, k_max: int, oracle_k: int = -1, oracle_ny: int = 2048) -> SpectrumReport:
    """Eigenvalues for ``k = 0..k_max``; optionally oracle values up to ``oracle_k``.

    Oracle values are extrapolated from the modal solves on
    ``oracle_ny / 8, / 4, / 2`` and ``oracle_ny`` intervals.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    lams = np.atleast_1d(lambda_k(state, gamma, np.arange(k_max + 1)))
    oracle = None
    if oracle_k >= 0:
        kk = min(oracle_k, k_max)
        oracle = np.array([oracle_lambda(state, gamma, k, oracle_ny) for k in range(kk + 1)])
    return SpectrumReport(state.params, state.rho_star, gamma, k_max, lams, oracle)


# ---------------------------------------------------------------------------
# threshold in gamma


@dataclass(frozen=True)
class ThresholdResult:
    gamma_min: float
    bracket_lo: float
    bracket_hi: float
    k_eff: int
    iterations: int


def _tail_constants(state: FlatStationaryState):
    p = state.params
    r = state.rho_star
    C = p.sigma_tilde * r + abs(state.c1)
    D = abs(p.sigma_tilde - p.sigma_bar_2)
    E = abs(state.c3) * (1.0 / math.tanh(r) + 1.0 / math.sinh(r))
    return p.mu * C, p.mu * D, p.mu * E


def certified_tail_start(state: FlatStationaryState, gamma: float, k_start: int = 1) -> int:
    """Smallest ``K >= k_start`` such that ``lambda_k(gamma) > 0`` for every ``k >= K``
    follows from a crude lower bound.

    For ``k >= K``, ``tanh(rho k) >= t_K`` and ``sqrt(1+k^2) <= sqrt(2) k``, so

        lambda_k >= k * (t_K gamma k^2 - t_K C - sqrt(2) E) - D,

    which increases in ``k`` once the bracket is positive.
    """
    C, D, E = _tail_constants(state)
    rho = state.rho_star

    def ok(K):
        t = math.tanh(rho * K)
        g = t * gamma * K * K - t * C - math.sqrt(2.0) * E
        return g > 0 and K * g - D > 0

    K = max(int(k_start), 1)
    if ok(K):
        return K
    hi = K
    while not ok(hi):
        hi *= 2
        if hi > 2**62:
            raise ToleranceNotReached(f"tail cannot be certified for gamma={gamma}")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return max(hi, K)


MAX_CERTIFIED_K = 10**7
_CHUNK = 10**5


def _min_lambda_certified(state, gamma, k_scan):
    """Minimum of ``lambda_k`` over every ``k >= 1`` and the last mode checked."""
    low = float(np.min(lambda_k(state, gamma, np.arange(1, k_scan + 1))))
    if low <= 0:
        return low, k_scan
    K = certified_tail_start(state, gamma, k_scan + 1)
    if K > MAX_CERTIFIED_K:
        raise ToleranceNotReached(f"tail certificate needs k up to {K} for gamma={gamma:.3e}")
    for start in range(k_scan + 1, K, _CHUNK):
        ks = np.arange(start, min(start + _CHUNK, K))
        low = min(low, float(np.min(lambda_k(state, gamma, ks))))
    return low, K - 1


def gamma_threshold(state: FlatStationaryState, k_scan: int = 200, tol: float = 1e-8, max_iter: int = 200) -> ThresholdResult:
    """Infimum of the surface tensions that make every ``lambda_k``, ``k >= 1``, positive.

    ``lambda_0 > 0`` always and is not part of the scan.  Each trial
    ``gamma`` is checked on ``k = 1..k_eff`` explicitly, where ``k_eff``
    comes from :func:`certified_tail_start`, so no mode is left unchecked.
    The returned ``gamma_min`` is the midpoint of a bracket of width
    ``<= tol``; the lower end fails and the upper end passes.
    """
    if k_scan < 1 or not tol > 0:
        raise ValueError("need k_scan >= 1 and tol > 0")

    def positive(g):
        m, _ = _min_lambda_certified(state, g, k_scan)
        return m > 0

    if positive(tol):
        _, k_eff = _min_lambda_certified(state, tol, k_scan)
        return ThresholdResult(0.0, 0.0, tol, k_eff, 0)
    lo, hi = tol, 1.0
    it = 0
    while not positive(hi):
        lo, hi = hi, 2.0 * hi
        it += 1
        if it > max_iter:
            raise ToleranceNotReached("no stabilising gamma found while doubling")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if positive(mid):
            hi = mid
        else:
            lo = mid
        it += 1
        if it > max_iter:
            raise ToleranceNotReached(f"bracket width {hi - lo:.3e} after {it} iterations")
    if hi - lo > tol:
        raise ToleranceNotReached(f"bracket width {hi - lo:.3e} cannot reach tol={tol:.3e}")
    _, k_eff = _min_lambda_certified(state, hi, k_scan)
    return ThresholdResult(0.5 * (lo + hi), lo, hi, k_eff, it)


# ---------------------------------------------------------------------------
# modal boundary value problems


@dataclass(frozen=True)
class ModalSolution:
    """Finite-difference modal solution for unit amplitude ``a_k = 1``."""

    k: int
    y: np.ndarray
    A: np.ndarray
    M: np.ndarray
    M_prime_top: float
    lam: float

    def boundary_residuals(self, gamma: float) -> dict:
        h = self.y[1] - self.y[0]
        return {
            "A(0)": abs(self.A[0]),
            "A(1)": abs(self.A[-1]),
            "M'(0)": abs((-3 * self.M[0] + 4 * self.M[1] - self.M[2]) / (2 * h)),
            "M(1)": abs(self.M[-1] - gamma * self.k**2),
        }


def nutrient_forcing(state: FlatStationaryState, k: int, y):
    """Right-hand side ``f_k`` of the modal nutrient problem."""
    r, c1, c2 = state.rho_star, state.c1, state.c2
    return (2.0 / r) * (c1 * np.sinh(y * r) + c2 * np.cosh(y * r)) - k**2 * y * (
        c1 * np.cosh(y * r) + c2 * np.sinh(y * r)
    )


def pressure_forcing(state: FlatStationaryState, k: int, y):
    """Right-hand side ``g_k`` of the modal pressure problem."""
    p = state.params
    r, c1, c2, mu, st = state.rho_star, state.c1, state.c2, p.mu, p.sigma_tilde
    return (2.0 / r) * mu * (st - c1 * np.sinh(y * r) - c2 * np.cosh(y * r)) - k**2 * mu * (
        c1 * y + st * r * y**2 - c2 * y * np.sinh(y * r) - c1 * y * np.cosh(y * r)
    )


def A_closed(state: FlatStationaryState, k: int, y):
    r, c1, c2 = state.rho_star, state.c1, state.c2
    s = math.sqrt(1.0 + k * k)
    ratio = _sinh_ratio(y * r * s, r * s)
    return c1 * (y * np.cosh(y * r) - ratio * math.cosh(r)) + c2 * (y * np.sinh(y * r) - ratio * math.sinh(r))


def _sinh_ratio(a, b):
    """``sinh(a) / sinh(b)`` for ``0 <= a <= b``, stable for large ``b``."""
    a = np.asarray(a, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(a - b) * (-np.expm1(-2.0 * a)) / (-np.expm1(-2.0 * b))
    return out


def _cosh_ratio(a, b):
    a = np.asarray(a, dtype=float)
    return np.exp(a - b) * (1.0 + np.exp(-2.0 * a)) / (1.0 + np.exp(-2.0 * b))


def M_closed(state: FlatStationaryState, gamma: float, k: int, y):
    p = state.params
    r, c1, c2, c3, mu, st = state.rho_star, state.c1, state.c2, state.c3, p.mu, p.sigma_tilde
    y = np.asarray(y, dtype=float)
    common = mu * c1 * y + mu * st * r * y**2 - mu * (c1 * y * np.cosh(y * r) + c2 * y * np.sinh(y * r))
    if k == 0:
        return -mu * c3 / math.sinh(r) * (y * r - r - np.sinh(y * r)) - mu * st * r - mu * c1 + common
    s = math.sqrt(1.0 + k * k)
    # sinh(yrk) - tanh(rk) cosh(yrk) = -sinh(rk(1-y)) / cosh(rk)
    lead = mu * c3 * s / k * np.sinh(r * k * (1.0 - y)) * _inv_sinh_cosh(r * s, r * k)
    return (
        lead
        + mu * c3 * _sinh_ratio(y * r * s, r * s)
        + (gamma * k**2 - mu * st * r - mu * c1) * _cosh_ratio(y * r * k, r * k)
        + common
    )


def _solve_two_point(ny: int, scale: float, k2: float, rhs: np.ndarray, neumann_bottom: bool, top: float, bottom: float = 0.0):
    """Second-order FD for ``u''/scale^2 - k2 u = rhs`` on ``[0, 1]``."""
    h = 1.0 / ny
    n = ny + 1
    diag = np.full(n, -2.0 / (h * scale) ** 2 - k2)
    upper = np.full(n - 1, 1.0 / (h * scale) ** 2)
    lower = np.full(n - 1, 1.0 / (h * scale) ** 2)
    b = np.array(rhs, dtype=float)
    if neumann_bottom:
        upper[0] = 2.0 / (h * scale) ** 2  # ghost node u_{-1} = u_1
    else:
        diag[0], upper[0], b[0] = 1.0, 0.0, bottom
    diag[-1], lower[-1], b[-1] = 1.0, 0.0, top
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    try:
        u = solve_banded((1, 1), ab, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(u)):
        raise SingularSystem("modal solve produced non-finite values")
    return u


def modal_oracle(state: FlatStationaryState, gamma: float, k: int, ny: int = 1024, k_oracle: int = K_ORACLE) -> ModalSolution:
    """Solve the modal BVPs by finite differences and return ``M_k'(1)/rho*``.

    Nutrient mode (Dirichlet/Dirichlet)::

        -k^2 A + A''/rho^2 = A + f_k,      A(0) = A(1) = 0

    Pressure mode (Neumann/Dirichlet)::

        -k^2 M + M''/rho^2 = -mu A + g_k,  M'(0) = 0,  M(1) = gamma k^2
    """
    if k < 0 or k > k_oracle:
        raise ValueError(f"oracle supports 0 <= k <= {k_oracle}")
    if ny < 64:
        raise ValueError("oracle needs ny >= 64")
    r = state.rho_star
    y = np.linspace(0.0, 1.0, ny + 1)
    A = _solve_two_point(ny, r, 1.0 + k * k, nutrient_forcing(state, k, y), False, 0.0)
    M = _solve_two_point(
        ny, r, float(k * k), -state.params.mu * A + pressure_forcing(state, k, y), True, gamma * k * k
    )
    h = 1.0 / ny
    Mp = (3 * M[-1] - 4 * M[-2] + M[-3]) / (2 * h)
    return ModalSolution(k, y, A, M, Mp, Mp / r)


def richardson(values_by_ny: dict, powers=(2,)) -> float:
    """Extrapolate ``{ny: value}`` to ``ny -> inf``.

    Fits ``value(h) = v_inf + sum_p c_p h^p`` over the ``len(powers) + 1``
    finest grids.  One-sided boundary stencils leave an ``h^3`` term, so
    ``powers=(2, 3, 4)`` is the useful choice with four grids.
    """
    nys = sorted(values_by_ny)[-(len(powers) + 1):]
    if len(nys) < len(powers) + 1:
        raise ValueError(f"need {len(powers) + 1} grids, got {len(values_by_ny)}")
    h = 1.0 / np.asarray(nys, dtype=float)
    V = np.column_stack([np.ones_like(h)] + [h**p for p in powers])
    coef = np.linalg.solve(V, np.array([values_by_ny[n] for n in nys]))
    return float(coef[0])


def oracle_lambda(state: FlatStationaryState, gamma: float, k: int, ny: int = 2048) -> float:
    """Extrapolated oracle eigenvalue from four nested grids ending at ``ny``."""
    if ny % 8:
        raise ValueError("oracle ny must be divisible by 8")
    values = {n: modal_oracle(state, gamma, k, n).lam for n in (ny // 8, ny // 4, ny // 2, ny)}
    return richardson(values, powers=(2, 3, 4))


def b_mode_symmetry_check(state: FlatStationaryState, gamma: float, k: int, ny: int = 256, nx: int = 32, rtol: float = 1e-9) -> bool:
    """Confirm that cosine and sine perturbations share the multiplier.

    Uses the two-dimensional linearised problem on the strip (spectral in x,
    finite differences in y), not the per-mode ODE route, so it also checks
    that the operator does not mix cosine and sine components.
    """
    if k == 0:
        return True
    cos_out = linearised_response(state, gamma, FourierModes(k, 1.0, 0.0), ny=ny, nx=nx)
    sin_out = linearised_response(state, gamma, FourierModes(k, 0.0, 1.0), ny=ny, nx=nx)
    lam_c, cross_c = cos_out
    cross_s, lam_s = sin_out
    scale = max(abs(lam_c), 1.0)
    return bool(
        abs(lam_c - lam_s) <= rtol * scale and abs(cross_c) <= rtol * scale and abs(cross_s) <= rtol * scale
    )


@dataclass(frozen=True)
class FourierModes:
    k: int
    a: float
    b: float


def linearised_response(state: FlatStationaryState, gamma: float, mode: FourierModes, ny: int = 256, nx: int = 32):
    """Apply the discrete linearised operator to ``a cos kx + b sin kx``.

    Returns the ``(cos, sin)`` coefficients of the image.
    """
    from .core import BoundaryProfile, PeriodicGrid, coeffs_from_samples
    from .elliptic import TransformedOperator, solve_dirichlet, solve_neumann_dirichlet, top_derivative

    p = state.params
    r = state.rho_star
    grid = PeriodicGrid(nx)
    x = grid.x
    k = mode.k
    rvec = mode.a * np.cos(k * x) + mode.b * np.sin(k * x)
    rxx = -(k**2) * rvec
    op = TransformedOperator(BoundaryProfile.flat(r, grid), ny, order=2)
    y = op.y
    Y = y[None, :]
    # b(v) r = (2 r / rho) v''(y rho) + r_xx y v'(y rho)
    sig_pp = state.c1 * np.sinh(Y * r) + state.c2 * np.cosh(Y * r)
    sig_p = state.c1 * np.cosh(Y * r) + state.c2 * np.sinh(Y * r)
    p_pp = -p.mu * (sig_pp - p.sigma_tilde)
    p_p = p.mu * (state.c1 - sig_p + p.sigma_tilde * Y * r)
    b_sigma = (2.0 / r) * rvec[:, None] * sig_pp + rxx[:, None] * Y * sig_p
    b_p = (2.0 / r) * rvec[:, None] * p_pp + rxx[:, None] * Y * p_p
    Sigma = solve_dirichlet(op, b_sigma, 0.0, 0.0, shift=1.0)
    P = solve_neumann_dirichlet(op, b_p - p.mu * Sigma.values, -gamma * rxx)
    image = top_derivative(P.values, op.h, 2) / r
    c = coeffs_from_samples(image)
    return c.mode(k)
