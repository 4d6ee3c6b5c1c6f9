"""Nonlinear boundary evolution ``rho_t = -Psi(rho)`` on the reference strip.

``Psi`` composes the strip solvers of :mod:`tumorstrip.elliptic`:

    tau = R(rho)(sb1, sb2),
    q   = S(rho)(-mu (tau - st)) + T(rho)(gamma kappa(rho)),
    Psi = B(rho) q.

Two time steppers are provided.  ``"imex"`` (default) splits off the
flat-state Fourier symbol ``lambda_k`` frozen at the current mean height and
treats it implicitly per mode, which removes the ``gamma k^3`` stiffness; the
remainder is explicit, so the scheme is first order.  ``"rk4"`` is classical
explicit Runge-Kutta, kept as a reference and limited by
``dt <= 2 / (gamma k_max^3 tanh(rho_mean k_max))``.

The volume ``Vol = int rho dx`` over one period obeys
``d/dt Vol = mu int int (sigma - st)``; the double integral is evaluated on
the reference strip with Jacobian ``rho`` and y'-weights dual to the
discrete pressure problem, which makes the discrete identity exact for flat
profiles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import BoundaryProfile, ModelParameters, PeriodicGrid, coeffs_from_samples, validate
from .elliptic import (
    BoundaryFunctional,
    TransformedOperator,
    curvature,
    quadrature_weights,
    solve_R,
    solve_ST,
)
from .errors import (
    AmplitudeUnderflow,
    NonPositiveProfile,
    PinchOff,
    SingularSystem,
    StepRejected,
    WindowTooShort,
)
from .spectrum import lambda_k
from .stationary import solve_rho_star, state_at_height

STEPPERS = ("imex", "rk4")
IMEX_DT = 1e-3
RK4_SAFETY = 2.0
BURN_IN = 0.1
AMPLITUDE_FLOOR = 1e-10
NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class PsiResult:
    """``Psi`` on the boundary plus the nutrient on the strip it came from."""

    psi: np.ndarray
    tau: np.ndarray
    source: float


def _psi_full(
    params: ModelParameters, p: BoundaryProfile, ny: int, order: int, method: str
) -> PsiResult:
    op = TransformedOperator(p, ny, order=order, method=method)
    tau = solve_R(op, params.sigma_bar_1, params.sigma_bar_2).values
    q = solve_ST(op, -params.mu * (tau - params.sigma_tilde), params.gamma * curvature(p))
    psi_vals = BoundaryFunctional.from_operator(op)(q.values)
    return PsiResult(psi_vals, tau, volume_source(params, p, tau, order))


def psi(
    params: ModelParameters,
    p: BoundaryProfile,
    ny: int = 64,
    order: int = 4,
    method: str = "direct",
) -> np.ndarray:
    """Normal velocity functional ``Psi(rho)``; the evolution is ``rho_t = -Psi``.

    Parameters
    ----------
    params : ModelParameters
    p : BoundaryProfile
        Strictly positive boundary samples.
    ny : int
        Number of y' intervals on the reference strip.
    order : {2, 4}
        Accuracy of the y' differences.
    method : {"direct", "krylov"}
        Linear-solve path of the strip operator.

    Raises
    ------
    PinchOff, SingularSystem
        Propagated from the strip solvers.
    """
    return _psi_full(params, p, ny, order, method).psi


def volume(p: BoundaryProfile) -> float:
    """``int_0^{2 pi} rho dx`` by the trapezoid rule (exact for the interpolant)."""
    return float(p.grid.h * math.fsum(p.values))


def volume_source(params: ModelParameters, p: BoundaryProfile, tau: np.ndarray, order: int = 4) -> float:
    """``mu int int_{Omega_rho} (sigma - st)`` mapped to the reference strip."""
    w = quadrature_weights(tau.shape[1] - 1, order)
    column = (tau - params.sigma_tilde) @ w
    return float(params.mu * p.grid.h * np.dot(p.values, column))


def rk4_dt_cap(gamma: float, rho_mean: float, nx: int, safety: float = RK4_SAFETY) -> float:
    k = nx // 2
    return safety / (gamma * k**3 * math.tanh(rho_mean * k))


def discrete_rho_star(params: ModelParameters, ny: int = 64, order: int = 4, nx: int = 8) -> float:
    """Flat height at which the discrete ``Psi`` vanishes.

    Flat profiles stay flat, so a short x-grid suffices.  The continuous
    root is the starting point and the discrete one lies within the
    discretisation error of it.
    """
    from scipy.optimize import brentq

    grid = PeriodicGrid(nx)
    rho = solve_rho_star(params)

    def g(c):
        return float(np.mean(psi(params, BoundaryProfile.flat(c, grid), ny, order)))

    lo, hi = rho * 0.99, rho * 1.01
    return float(brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


@dataclass(frozen=True)
class EvolutionConfig:
    """Settings of one evolution run.

    ``dt="auto"`` means ``1e-3`` for IMEX and the explicit stability cap for
    RK4.  A rejected step (loss of positivity or non-finite values) is
    retried with half the step, at most ``max_halvings`` times; the reduced
    step is kept for the rest of the run.
    """

    params: ModelParameters
    initial: BoundaryProfile
    t_end: float
    stepper: str = "imex"
    dt: Union[float, str] = "auto"
    record_every: int = 1
    tracked_modes: tuple = (1,)
    ny: int = 64
    order: int = 4
    method: str = "krylov"
    max_halvings: int = 20

    def __post_init__(self):
        validate(self.params)
        object.__setattr__(self, "tracked_modes", tuple(int(k) for k in self.tracked_modes))
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}, got {self.stepper!r}")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ValueError("t_end must be finite and positive")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be a positive number or 'auto', got {self.dt!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        kmax = self.initial.grid.nx // 2 - 1
        for k in self.tracked_modes:
            if not 1 <= k <= kmax:
                raise ValueError(f"tracked mode {k} outside 1..{kmax}")
        if self.stepper == "rk4" and self.dt != "auto":
            cap = rk4_dt_cap(self.params.gamma, float(self.initial.values.mean()), self.initial.grid.nx)
            if self.dt > cap:
                raise ValueError(f"dt = {self.dt} exceeds the explicit stability cap {cap:.3e}")

    def resolved_dt(self) -> float:
        if self.dt != "auto":
            return float(self.dt)
        if self.stepper == "imex":
            return IMEX_DT
        return rk4_dt_cap(self.params.gamma, float(self.initial.values.mean()), self.initial.grid.nx)

    @property
    def h(self) -> float:
        """Coarsest mesh width of the run, used for error envelopes."""
        return max(self.initial.grid.h, 1.0 / self.ny)


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    """Recorded history of a run.

    ``modes[k]`` is an array of shape ``(n_records, 2)`` with the cosine and
    sine coefficients of mode ``k``.  ``volume_residual[i]`` belongs to the
    step leaving ``times[i]``; the last entry is the instantaneous residual
    ``-int Psi - mu int int (sigma - st)`` at the final time.
    """

    config: EvolutionConfig
    times: np.ndarray
    profiles: np.ndarray
    volume: np.ndarray
    volume_residual: np.ndarray
    max_rho: np.ndarray
    min_rho: np.ndarray
    modes: dict
    termination: str
    steps: int
    dt: float
    max_volume_residual: float

    def amplitude(self, k: int) -> np.ndarray:
        a = self.modes[k]
        return np.hypot(a[:, 0], a[:, 1])


def _imex_symbol(params: ModelParameters, rho_mean: float, nx: int) -> np.ndarray:
    state = state_at_height(params, rho_mean)
    k = np.arange(nx // 2 + 1)
    lam = np.maximum(np.asarray(lambda_k(state, params.gamma, k), dtype=float), 0.0)
    lam[0] = 0.0  # the mean is advanced explicitly so the volume law stays exact
    return lam


class _Stepper:
    def __init__(self, config: EvolutionConfig):
        self.config = config
        self.params = config.params
        self.grid = config.initial.grid

    def evaluate(self, p: BoundaryProfile) -> PsiResult:
        c = self.config
        return _psi_full(self.params, p, c.ny, c.order, c.method)

    def _profile(self, values: np.ndarray) -> BoundaryProfile:
        if not np.all(np.isfinite(values)):
            raise StepRejected("non-finite boundary values")
        try:
            return BoundaryProfile(self.grid, values)
        except NonPositiveProfile as exc:
            raise StepRejected(str(exc)) from exc

    def advance(self, p: BoundaryProfile, first: PsiResult, dt: float) -> BoundaryProfile:
        if self.config.stepper == "imex":
            return self._imex(p, first, dt)
        return self._rk4(p, first, dt)

    def _imex(self, p, first, dt):
        lam = _imex_symbol(self.params, float(p.values.mean()), self.grid.nx)
        rho_hat = np.fft.rfft(p.values)
        psi_hat = np.fft.rfft(first.psi)
        new_hat = rho_hat - dt * psi_hat / (1.0 + dt * lam)
        return self._profile(np.fft.irfft(new_hat, n=self.grid.nx))

    def _rk4(self, p, first, dt):
        k1 = first.psi
        k2 = self.evaluate(self._profile(p.values - 0.5 * dt * k1)).psi
        k3 = self.evaluate(self._profile(p.values - 0.5 * dt * k2)).psi
        k4 = self.evaluate(self._profile(p.values - dt * k3)).psi
        return self._profile(p.values - dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def step(config: EvolutionConfig, p: BoundaryProfile, dt: Optional[float] = None) -> BoundaryProfile:
    """Advance ``p`` by one step of the configured scheme.

    The step is halved on rejection up to ``config.max_halvings`` times.

    Raises
    ------
    StepRejected
        If no admissible step was found.
    PinchOff
        If the profile is too close to the substrate to solve on.
    """
    stepper = _Stepper(config)
    dt = config.resolved_dt() if dt is None else float(dt)
    first = stepper.evaluate(p)
    return _try_advance(stepper, p, first, dt)[0]


def _try_advance(stepper: _Stepper, p, first, dt):
    for _ in range(stepper.config.max_halvings + 1):
        try:
            return stepper.advance(p, first, dt), dt
        except (StepRejected, PinchOff, SingularSystem):
            dt *= 0.5
    raise StepRejected(f"step rejected after {stepper.config.max_halvings} halvings")


def evolve(config: EvolutionConfig) -> EvolutionTrace:
    """Integrate to ``config.t_end`` or until the run cannot continue.

    The termination reason is ``"completed"``, ``"pinch-off"`` or
    ``"step-collapse"``; no exception escapes for those cases.
    """
    stepper = _Stepper(config)
    dt = config.resolved_dt()
    t_end = float(config.t_end)
    p = config.initial

    times, profiles, vols, resid = [], [], [], []
    modes = {k: [] for k in config.tracked_modes}
    max_res = 0.0

    def record(t, prof, r):
        times.append(t)
        profiles.append(prof.values.copy())
        vols.append(volume(prof))
        resid.append(r)
        c = coeffs_from_samples(prof.values)
        for k in config.tracked_modes:
            modes[k].append(c.mode(k))

    t = 0.0
    n = 0
    termination = "completed"
    while True:
        try:
            first = stepper.evaluate(p)
        except PinchOff:
            termination = "pinch-off"
            break
        except SingularSystem:
            termination = "step-collapse"
            break
        if t >= t_end:
            r = -p.grid.h * float(np.sum(first.psi)) - first.source
            record(t, p, r)
            break
        h_step = min(dt, t_end - t)
        try:
            new, used = _try_advance(stepper, p, first, h_step)
        except StepRejected:
            termination = "step-collapse"
            record(t, p, float("nan"))
            break
        if used < h_step:
            dt = used
        r = (volume(new) - volume(p)) / used - first.source
        max_res = max(max_res, abs(r))
        if n % config.record_every == 0:
            record(t, p, r)
        t_next = t + used
        if t_end - t_next <= 1e-12 * t_end:
            t_next = t_end
        t, p, n = t_next, new, n + 1

    if termination == "pinch-off" and (not times or times[-1] < t):
        record(t, p, float("nan"))

    return EvolutionTrace(
        config=config,
        times=np.array(times),
        profiles=np.array(profiles),
        volume=np.array(vols),
        volume_residual=np.array(resid),
        max_rho=np.array([v.max() for v in profiles]),
        min_rho=np.array([v.min() for v in profiles]),
        modes={k: np.array(v, dtype=float).reshape(-1, 2) for k, v in modes.items()},
        termination=termination,
        steps=n,
        dt=dt,
        max_volume_residual=max_res,
    )


@dataclass(frozen=True)
class DecayEstimate:
    """Exponential fit ``|r_k(t)| ~ K |r_k(0)| exp(-omega t)`` over ``window``."""

    k: int
    omega: float
    K: float
    window: tuple
    r_squared: float
    n_points: int


def fit_decay(
    trace: EvolutionTrace,
    k: int,
    burn_in: float = BURN_IN,
    floor: float = AMPLITUDE_FLOOR,
    min_points: int = 3,
) -> DecayEstimate:
    """Least-squares slope of ``ln |r_k(t)|`` with ``|r_k| = hypot(a_k, b_k)``.

    The window is ``[burn_in, min(t_end, first time |r_k| < floor))``.

    Raises
    ------
    KeyError
        If ``k`` was not tracked.
    AmplitudeUnderflow
        If the amplitude is below the noise floor when the window opens.
    WindowTooShort
        If fewer than ``min_points`` samples fall in the window.
    """
    if k not in trace.modes:
        raise KeyError(f"mode {k} was not tracked")
    t = np.asarray(trace.times, dtype=float)
    amp = trace.amplitude(k)
    inside = t >= burn_in
    if not np.any(inside):
        raise WindowTooShort(f"no samples after burn-in {burn_in}")
    start = int(np.argmax(inside))
    if not amp[start] >= max(floor, NOISE_FLOOR):
        raise AmplitudeUnderflow(f"mode {k} amplitude {amp[start]:.3e} is below the noise floor")
    below = np.nonzero(amp[start:] < floor)[0]
    stop = start + (int(below[0]) if below.size else amp.size - start)
    tw, aw = t[start:stop], amp[start:stop]
    if tw.size < min_points:
        raise WindowTooShort(f"only {tw.size} samples in the fit window")
    y = np.log(aw)
    slope, intercept = np.polyfit(tw, y, 1)
    fit = slope * tw + intercept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    amp0 = amp[0] if amp[0] > 0 else 1.0
    return DecayEstimate(
        k=int(k),
        omega=float(-slope),
        K=float(math.exp(intercept) / amp0),
        window=(float(tw[0]), float(tw[-1])),
        r_squared=float(r2),
        n_points=int(tw.size),
    )
