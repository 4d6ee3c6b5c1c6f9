"""Shared model types, periodic grids and the real-trigonometric Fourier view.

Boundary profiles live on the equispaced grid ``x_j = 2*pi*j/nx`` of the
circle ``R / 2piZ``.  Fourier data use the real convention

    rho(x) = a0 + sum_k (a_k cos(kx) + b_k sin(kx)),   k = 1 .. nx/2 - 1,

so that modal statements read exactly like the multiplier formula in
:mod:`tumorstrip.spectrum`.  The Nyquist cosine ``cos(nx/2 * x)`` is kept
separately (``a_nyquist``) so that the sample <-> coefficient maps are exact
inverses, but it never takes part in modal analysis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AlphaOutOfRange, GridMismatch, NonPositiveParameter, NonPositiveProfile


@dataclass(frozen=True)
class ModelParameters:
    """Physical constants of the growth model.

    Attributes
    ----------
    mu : float
        Proliferation rate.
    sigma_tilde : float
        Nutrient threshold above which volume is produced.
    sigma_bar_1, sigma_bar_2 : float
        Nutrient concentration on the substrate ``y = 0`` and on the free
        surface ``y = rho(x)``.
    gamma : float
        Surface tension coefficient.
    """

    mu: float
    sigma_tilde: float
    sigma_bar_1: float
    sigma_bar_2: float
    gamma: float

    def alpha(self) -> float:
        return (self.sigma_bar_1 + self.sigma_bar_2) / self.sigma_tilde

    def replace(self, **changes) -> "ModelParameters":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return ModelParameters(**kw)

    def as_dict(self) -> dict:
        return {f: float(getattr(self, f)) for f in self.__dataclass_fields__}


#: Parameters used for the published spectrum plot.
REFERENCE_PARAMS = ModelParameters(mu=1.0, sigma_tilde=1.0, sigma_bar_1=2.0, sigma_bar_2=3.0, gamma=1.0)


def validate(params: ModelParameters) -> ModelParameters:
    """Check positivity of every constant and ``alpha > 2``; return ``params``."""
    for name in params.__dataclass_fields__:
        value = getattr(params, name)
        if not (math.isfinite(value) and value > 0):
            raise NonPositiveParameter(f"{name} must be finite and > 0, got {value!r}")
    alpha = params.alpha()
    if not alpha > 2.0:
        raise AlphaOutOfRange(
            f"alpha = (sigma_bar_1 + sigma_bar_2)/sigma_tilde = {alpha!r} must exceed 2 "
            "(need sigma_bar_1, sigma_bar_2 > sigma_tilde for a flat stationary state)"
        )
    return params


@dataclass(frozen=True)
class PeriodicGrid:
    nx: int = 64

    def __post_init__(self):
        if int(self.nx) != self.nx or self.nx < 8 or self.nx % 2:
            raise ValueError(f"nx must be an even integer >= 8, got {self.nx!r}")

    @property
    def x(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.nx) / self.nx

    @property
    def h(self) -> float:
        return 2.0 * np.pi / self.nx

    @property
    def k_rep(self) -> int:
        """Largest mode used in modal analysis (the Nyquist mode is excluded)."""
        return self.nx // 2 - 1


@dataclass(frozen=True, eq=False)
class BoundaryProfile:
    """Samples ``rho(x_j)`` of a positive periodic boundary."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.nx,):
            raise GridMismatch(f"expected {self.grid.nx} samples, got shape {v.shape}")
        if not np.all(v > 0):
            raise NonPositiveProfile(f"profile has non-positive samples (min {v.min():.3e})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, func, grid: PeriodicGrid) -> "BoundaryProfile":
        return cls(grid, func(grid.x))

    @classmethod
    def flat(cls, height: float, grid: PeriodicGrid) -> "BoundaryProfile":
        return cls(grid, np.full(grid.nx, float(height)))

    def shifted(self, nodes: int) -> "BoundaryProfile":
        return BoundaryProfile(self.grid, np.roll(self.values, nodes))


@dataclass(frozen=True, eq=False)
class FourierCoeffs:
    """Real trigonometric coefficients of a grid function.

    ``a[k-1]`` and ``b[k-1]`` hold the cosine and sine coefficient of mode
    ``k`` for ``k = 1 .. nx/2 - 1``.
    """

    a0: float
    a: np.ndarray
    b: np.ndarray
    a_nyquist: float = 0.0

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise GridMismatch("cosine and sine coefficient arrays must have equal 1-D shape")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "a_nyquist", float(self.a_nyquist))

    @property
    def k_rep(self) -> int:
        return self.a.size

    def mode(self, k: int) -> tuple[float, float]:
        """``(a_k, b_k)``; ``k = 0`` returns ``(a0, 0)``."""
        if k == 0:
            return self.a0, 0.0
        return float(self.a[k - 1]), float(self.b[k - 1])

    def mean_square(self) -> float:
        """Parseval form of the grid mean of the squared samples."""
        return self.a0**2 + 0.5 * float(np.sum(self.a**2 + self.b**2)) + self.a_nyquist**2

    @classmethod
    def single_mode(cls, k: int, nx: int, a0=0.0, ak=0.0, bk=0.0) -> "FourierCoeffs":
        a = np.zeros(nx // 2 - 1)
        b = np.zeros(nx // 2 - 1)
        if k >= 1:
            a[k - 1], b[k - 1] = ak, bk
        return cls(a0, a, b)


@dataclass(frozen=True, eq=False)
class StripField:
    """Samples of ``v(x'_j, y'_m)`` on the reference strip, shape ``(nx, ny+1)``."""

    grid_x: PeriodicGrid
    ny: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid_x.nx, self.ny + 1):
            raise GridMismatch(
                f"expected shape {(self.grid_x.nx, self.ny + 1)}, got {v.shape}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.ny + 1)

    @classmethod
    def from_function(cls, func, grid_x: PeriodicGrid, ny: int) -> "StripField":
        X, Y = np.meshgrid(grid_x.x, np.linspace(0.0, 1.0, ny + 1), indexing="ij")
        return cls(grid_x, ny, np.broadcast_to(func(X, Y), X.shape))


def _rfft_coeffs(values: np.ndarray) -> np.ndarray:
    return np.fft.rfft(values, axis=0) / values.shape[0]


def to_fourier(p: BoundaryProfile) -> FourierCoeffs:
    return coeffs_from_samples(p.values)


def coeffs_from_samples(values) -> FourierCoeffs:
    """Real trigonometric interpolation coefficients of arbitrary (possibly
    non-positive) periodic samples."""
    values = np.asarray(values, dtype=float)
    n = values.size
    c = _rfft_coeffs(values)
    half = n // 2
    return FourierCoeffs(
        a0=c[0].real,
        a=2.0 * c[1:half].real,
        b=-2.0 * c[1:half].imag,
        a_nyquist=c[half].real,
    )


def samples_from_coeffs(c: FourierCoeffs, nx: int) -> np.ndarray:
    half = nx // 2
    if c.k_rep != half - 1:
        raise GridMismatch(f"{c.k_rep} modes do not match a grid of {nx} nodes")
    hat = np.zeros(half + 1, dtype=complex)
    hat[0] = c.a0
    hat[1:half] = 0.5 * (c.a - 1j * c.b)
    hat[half] = c.a_nyquist
    return np.fft.irfft(hat * nx, n=nx)


def from_fourier(c: FourierCoeffs, grid: PeriodicGrid) -> BoundaryProfile:
    """Inverse of :func:`to_fourier`.

    Raises
    ------
    NonPositiveProfile
        If the reconstructed samples are not all positive.
    """
    return BoundaryProfile(grid, samples_from_coeffs(c, grid.nx))


def _wavenumbers(n: int, order: int) -> np.ndarray:
    k = np.arange(n // 2 + 1, dtype=float)
    sym = (1j * k) ** order
    if order % 2:
        sym[-1] = 0.0  # the Nyquist sawtooth has no odd derivative on the grid
    return sym


def periodic_derivative(values, order: int = 1, axis: int = 0) -> np.ndarray:
    """Spectral derivative of real periodic samples along ``axis``."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    sym = _wavenumbers(n, order)
    shape = [1] * values.ndim
    shape[axis] = sym.size
    hat = np.fft.rfft(values, axis=axis) * sym.reshape(shape)
    return np.fft.irfft(hat, n=n, axis=axis)


def spectral_derivative(p: BoundaryProfile, order: int = 1) -> np.ndarray:
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return periodic_derivative(p.values, order)


@lru_cache(maxsize=16)
def fourier_diff_matrix(nx: int, order: int) -> np.ndarray:
    """Dense matrix ``D`` with ``D @ v == periodic_derivative(v, order)``."""
    D = periodic_derivative(np.eye(nx), order, axis=0)
    D.setflags(write=False)
    return D
