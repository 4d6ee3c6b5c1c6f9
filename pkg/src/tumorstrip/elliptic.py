"""Pulled-back elliptic operators on the reference strip ``S x (0, 1)``.

With ``y = y' rho(x')`` the Laplacian becomes

    A(rho) v = v_xx - v_xy 2 y' rho_x / rho + v_yy (1 + y'^2 rho_x^2) / rho^2
               - v_y y' (rho_xx rho - 2 rho_x^2) / rho^2

and the (non-normalised) co-normal derivative on the top boundary is

    B(rho) v = (-v_x + v_y rho_x / rho) rho_x + v_y / rho     at y' = 1.

Discretisation: Fourier-spectral in x', finite differences of order 2 or 4
on a uniform y' grid, identity Dirichlet rows.  The Neumann row at y' = 0
eliminates a ghost node for order 2 and imposes a one-sided derivative for
order 4.
Unknowns are ordered ``index = m * nx + j`` (y' level ``m``, x' node ``j``).

Two linear-solve paths share the same discrete operator:

``"direct"``
    assembled sparse matrix, one sparse LU per problem type, cached.
``"krylov"``
    matrix-free GMRES right-preconditioned by the exact solver of the flat
    strip at the mean height (diagonal in Fourier modes).  This is what the
    time stepper uses; it falls back to the direct path if GMRES stalls.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    BoundaryProfile,
    StripField,
    fourier_diff_matrix,
    periodic_derivative,
    spectral_derivative,
)
from .errors import GridMismatch, PinchOff, SingularSystem

PINCH_RATIO = 1e-6


def curvature(p: BoundaryProfile) -> np.ndarray:
    """Curvature of ``y = rho(x)`` with the sign flipped so that a concave
    profile (boundary convex toward the outer normal) is positive."""
    rx = spectral_derivative(p, 1)
    rxx = spectral_derivative(p, 2)
    return -rxx * (1.0 + rx**2) ** -1.5


def fd_weights(offsets, deriv: int) -> np.ndarray:
    """Finite-difference weights for the ``deriv``-th derivative on the given
    integer offsets (unit spacing), from the Taylor/Vandermonde conditions."""
    s = np.asarray(offsets, dtype=float)
    n = s.size
    V = np.array([s**p / math.factorial(p) for p in range(n)])
    rhs = np.zeros(n)
    rhs[deriv] = 1.0
    return np.linalg.solve(V, rhs)


# (offsets for D1, offsets for D2) at the boundary node, the first interior
# node and the remaining interior nodes; mirrored at the top boundary
_STENCILS = {
    2: {"edge": ((0, 1, 2), (0, 1, 2, 3)), "near": ((-1, 0, 1), (-1, 0, 1)), "mid": ((-1, 0, 1), (-1, 0, 1))},
    4: {
        "edge": ((0, 1, 2, 3, 4), (0, 1, 2, 3, 4, 5)),
        "near": ((-1, 0, 1, 2, 3), (-1, 0, 1, 2, 3, 4)),
        "mid": ((-2, -1, 0, 1, 2), (-2, -1, 0, 1, 2)),
    },
}


@lru_cache(maxsize=32)
def y_diff_matrices(ny: int, order: int = 2) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse first and second y'-derivative matrices on ``m/ny``, ``m = 0..ny``.

    Every row (including both boundary rows) is accurate to ``order``.
    """
    if order not in _STENCILS:
        raise ValueError(f"y' order must be 2 or 4, got {order}")
    st = _STENCILS[order]
    h = 1.0 / ny
    n = ny + 1
    if n < len(st["edge"][1]) + 1:
        raise ValueError(f"ny = {ny} is too small for order {order}")
    mats = []
    for which, scale in ((0, 1.0 / h), (1, 1.0 / h**2)):
        D = sp.lil_matrix((n, n))
        for m in range(n):
            if m == 0 or m == ny:
                offs = st["edge"][which]
            elif m == 1 or m == ny - 1:
                offs = st["near"][which]
            else:
                offs = st["mid"][which]
            offs = np.asarray(offs)
            if m > ny // 2:
                offs = -offs
            w = fd_weights(offs, which + 1) * scale
            for o, c in zip(offs, w):
                D[m, m + o] = c
        mats.append(D.tocsr())
    return mats[0], mats[1]


def top_derivative(v: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    """One-sided ``v_y'`` at ``y' = 1`` for an ``(nx, ny+1)`` array."""
    D1, _ = y_diff_matrices(v.shape[1] - 1, order)
    row = D1.getrow(v.shape[1] - 1)
    return v[:, row.indices] @ row.data


def _neumann_row(ny: int, order: int) -> np.ndarray:
    """Dense row imposing ``v_y'(0) = 0``.

    Order 2 eliminates a ghost node, so the row is the PDE row itself
    (returned as ``None``); order 4 imposes the one-sided derivative.
    """
    if order == 2:
        return None
    D1, _ = y_diff_matrices(ny, order)
    return D1.getrow(0).toarray().ravel()


def _flat_system_1d(ny: int, order: int, kind: str, k2: float, shift: float, rho: float) -> np.ndarray:
    """Dense 1-D system for one Fourier mode of a flat strip of height ``rho``."""
    _, D2 = y_diff_matrices(ny, order)
    M = D2.toarray() / rho**2 - (k2 + shift) * np.eye(ny + 1)
    if kind == "dirichlet":
        M[0] = 0.0
        M[0, 0] = 1.0
    else:
        row = _neumann_row(ny, order)
        if row is None:
            h = 1.0 / ny
            M[0] = 0.0
            M[0, 0] = -2.0 / (h * rho) ** 2 - k2 - shift
            M[0, 1] = 2.0 / (h * rho) ** 2
        else:
            M[0] = row
    M[-1] = 0.0
    M[-1, -1] = 1.0
    return M


@lru_cache(maxsize=64)
def _flat_inverses(nx: int, ny: int, order: int, kind: str, shift: float, rho: float) -> np.ndarray:
    mats = np.array(
        [_flat_system_1d(ny, order, kind, float(k) ** 2, shift, rho) for k in range(nx // 2 + 1)]
    )
    inv = np.linalg.inv(mats)
    inv.setflags(write=False)
    return inv


@lru_cache(maxsize=32)
def quadrature_weights(ny: int, order: int = 2) -> np.ndarray:
    """y'-weights dual to the discrete pressure problem.

    With these weights, summing the discrete equations of the
    Neumann/Dirichlet problem reproduces the one-sided top derivative
    exactly, so the discrete divergence theorem holds to round-off on flat
    profiles.  For order 2 they are ``h * (1/2, 1, ..., 1, 3/2, 0)``.  As a
    quadrature rule on [0, 1] they are accurate to ``order``.
    """
    M = _flat_system_1d(ny, order, "neumann", 0.0, 0.0, 1.0)
    D1, _ = y_diff_matrices(ny, order)
    d_top = D1.getrow(ny).toarray().ravel()
    w = np.linalg.solve(M.T, d_top)
    w[-1] = 0.0
    if order != 2:
        w[0] = 0.0  # the Neumann row carries no source term
    w.setflags(write=False)
    return w


class TransformedOperator:
    """Discrete ``A(rho)`` on an ``nx x (ny+1)`` strip grid for one profile.

    Parameters
    ----------
    profile : BoundaryProfile
        Strictly positive boundary samples.
    ny : int
        Number of y' intervals.
    order : {2, 4}
        Accuracy of the y' finite differences.
    method : {"direct", "krylov"}
        Linear-solve path (see module docstring).
    rtol : float
        GMRES relative tolerance for the Krylov path.
    """

    def __init__(
        self,
        profile: BoundaryProfile,
        ny: int = 64,
        order: int = 2,
        method: str = "direct",
        rtol: float = 1e-12,
    ):
        if method not in ("direct", "krylov"):
            raise ValueError(f"unknown method {method!r}")
        rho = profile.values
        if rho.min() < PINCH_RATIO * rho.mean():
            raise PinchOff(f"min rho = {rho.min():.3e} is below {PINCH_RATIO} x mean height")
        self.profile = profile
        self.grid = profile.grid
        self.nx = profile.grid.nx
        self.ny = int(ny)
        self.order = int(order)
        self.D1, self.D2 = y_diff_matrices(self.ny, self.order)
        self.h = 1.0 / self.ny
        self.method = method
        self.rtol = rtol
        self.rho = rho
        self.rho_x = spectral_derivative(profile, 1)
        self.rho_xx = spectral_derivative(profile, 2)
        self.y = np.linspace(0.0, 1.0, self.ny + 1)
        r, rx, rxx = rho[:, None], self.rho_x[:, None], self.rho_xx[:, None]
        Y = self.y[None, :]
        self.c_xy = -2.0 * Y * rx / r
        self.c_yy = (1.0 + Y**2 * rx**2) / r**2
        self.c_y = -Y * (rxx * r - 2.0 * rx**2) / r**2
        self._lu: dict = {}
        self._flat_inv: dict = {}

    def check_field(self, v: StripField) -> None:
        if v.grid_x.nx != self.nx or v.ny != self.ny:
            raise GridMismatch(
                f"field grid ({v.grid_x.nx}, {v.ny}) does not match operator ({self.nx}, {self.ny})"
            )

    @property
    def neumann_source_row(self) -> bool:
        """Whether row 0 of the Neumann problem carries the source term."""
        return self.order == 2

    def evaluate(self, v: np.ndarray) -> np.ndarray:
        """``A(rho) v`` at every node of an ``(nx, ny+1)`` array."""
        vy = (self.D1 @ v.T).T
        vyy = (self.D2 @ v.T).T
        vxx = periodic_derivative(v, 2, axis=0)
        vxy = periodic_derivative(vy, 1, axis=0)
        return vxx + self.c_xy * vxy + self.c_yy * vyy + self.c_y * vy

    # problem keys: ("dirichlet", shift) -> rows 0 and ny identity, interior A - shift
    #               ("neumann", shift)   -> row 0 imposes v_y' = 0, row ny identity
    def apply_system(self, v: np.ndarray, problem) -> np.ndarray:
        kind, shift = problem
        out = self.evaluate(v)
        if shift:
            out -= shift * v
        if kind == "dirichlet":
            out[:, 0] = v[:, 0]
        elif self.order == 2:
            v0 = v[:, 0]
            out[:, 0] = (
                periodic_derivative(v0, 2)
                + self.c_yy[:, 0] * 2.0 * (v[:, 1] - v0) / self.h**2
                - shift * v0
            )
        else:
            out[:, 0] = (self.D1[0] @ v.T).ravel()
        out[:, -1] = v[:, -1]
        return out

    def matrix(self, problem) -> sp.csr_matrix:
        """Assembled sparse form of :meth:`apply_system`."""
        kind, shift = problem
        nx, ny, h = self.nx, self.ny, self.h
        n_lev = ny + 1
        Dx = sp.csr_matrix(fourier_diff_matrix(nx, 1))
        Dxx = sp.csr_matrix(fourier_diff_matrix(nx, 2))
        Ix = sp.identity(nx, format="csr")

        def node_diag(c):
            # coefficient arrays are (nx, ny+1); flatten in (m, j) order
            return sp.diags(np.asarray(c).T.ravel())

        full = (
            sp.kron(sp.identity(n_lev), Dxx)
            + node_diag(self.c_yy) @ sp.kron(self.D2, Ix)
            + node_diag(self.c_xy) @ sp.kron(self.D1, Dx)
            + node_diag(self.c_y) @ sp.kron(self.D1, Ix)
            - shift * sp.identity(n_lev * nx)
        )
        interior = np.ones(n_lev)
        interior[[0, -1]] = 0.0

        def level_block(m0, m1, block):
            e = sp.csr_matrix(([1.0], ([m0], [m1])), shape=(n_lev, n_lev))
            return sp.kron(e, block)

        bc = level_block(ny, ny, Ix)
        if kind == "dirichlet":
            bc = bc + level_block(0, 0, Ix)
        elif self.order == 2:
            c0 = self.c_yy[:, 0]
            bc = bc + level_block(0, 0, Dxx + sp.diags(-2.0 * c0 / h**2 - shift))
            bc = bc + level_block(0, 1, sp.diags(2.0 * c0 / h**2))
        else:
            row = self.D1.getrow(0)
            for m, c in zip(row.indices, row.data):
                bc = bc + level_block(0, m, c * Ix)
        A = sp.diags(np.repeat(interior, nx)) @ full + bc
        return sp.csr_matrix(A)

    def _factor(self, problem):
        if problem not in self._lu:
            try:
                self._lu[problem] = spla.splu(self.matrix(problem).tocsc())
            except RuntimeError as exc:  # "Factor is exactly singular"
                raise SingularSystem(str(exc)) from exc
        return self._lu[problem]

    def _flat_solver(self, problem):
        """Exact inverse of the flat-strip system at the mean height, per mode."""
        if problem not in self._flat_inv:
            kind, shift = problem
            # the preconditioner only needs the mean height approximately
            rbar = float(f"{self.rho.mean():.6g}")
            self._flat_inv[problem] = _flat_inverses(self.nx, self.ny, self.order, kind, shift, rbar)
        return self._flat_inv[problem]

    def _precondition(self, r: np.ndarray, problem) -> np.ndarray:
        inv = self._flat_solver(problem)
        rhat = np.fft.rfft(r, axis=0)
        zhat = (inv @ rhat.real[:, :, None])[..., 0] + 1j * (inv @ rhat.imag[:, :, None])[..., 0]
        return np.fft.irfft(zhat, n=self.nx, axis=0)

    def solve_system(self, rhs: np.ndarray, problem) -> np.ndarray:
        if self.method == "krylov":
            out = self._solve_krylov(rhs, problem)
            if out is not None:
                return out
        sol = self._factor(problem).solve(np.ascontiguousarray(rhs.T).ravel())
        if not np.all(np.isfinite(sol)):
            raise SingularSystem("direct solve produced non-finite values")
        return sol.reshape(self.ny + 1, self.nx).T

    def _solve_krylov(self, rhs, problem):
        shape = (self.nx, self.ny + 1)
        n = self.nx * (self.ny + 1)
        b = rhs.ravel()
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros(shape)

        # right preconditioning: solve (L P) z = b, x = P z
        def lp(z):
            return self.apply_system(self._precondition(z.reshape(shape), problem), problem).ravel()

        op = spla.LinearOperator((n, n), matvec=lp, dtype=float)
        z, info = spla.gmres(op, b, rtol=self.rtol, atol=0.0, restart=60, maxiter=20)
        if info != 0:
            return None
        x = self._precondition(z.reshape(shape), problem)
        res = np.linalg.norm(self.apply_system(x, problem).ravel() - b)
        if res > 1e2 * self.rtol * bnorm:
            return None
        return x


class BoundaryFunctional:
    """Discrete ``B(rho)``: co-normal derivative trace on ``y' = 1``."""

    def __init__(self, profile: BoundaryProfile, ny: int = 64, order: int = 2):
        self.profile = profile
        self.nx = profile.grid.nx
        self.ny = int(ny)
        self.order = int(order)
        self.h = 1.0 / self.ny
        self.rho = profile.values
        self.rho_x = spectral_derivative(profile, 1)

    @classmethod
    def from_operator(cls, op: TransformedOperator) -> "BoundaryFunctional":
        return cls(op.profile, op.ny, op.order)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        vy = top_derivative(v, self.h, self.order)
        vx = periodic_derivative(v[:, -1], 1)
        return (-vx + vy * self.rho_x / self.rho) * self.rho_x + vy / self.rho


def apply_A(op: TransformedOperator, v: StripField) -> StripField:
    """Evaluate ``A(rho) v`` at every node.

    Interior levels use centred differences in y'; the boundary levels use
    one-sided differences of the same order.
    """
    op.check_field(v)
    return StripField(v.grid_x, v.ny, op.evaluate(v.values))


def apply_B(bf: BoundaryFunctional, v: StripField) -> np.ndarray:
    if v.grid_x.nx != bf.nx or v.ny != bf.ny:
        raise GridMismatch("field grid does not match boundary functional")
    return bf(v.values)


def _field_values(op, f):
    if isinstance(f, StripField):
        op.check_field(f)
        return f.values
    arr = np.asarray(f, dtype=float)
    if arr.shape != (op.nx, op.ny + 1):
        raise GridMismatch(f"right-hand side has shape {arr.shape}")
    return arr


def solve_dirichlet(op: TransformedOperator, f, bottom, top, shift: float = 0.0) -> StripField:
    """Solve ``(A - shift) v = f`` with Dirichlet data on both boundaries."""
    rhs = np.zeros((op.nx, op.ny + 1))
    if f is not None:
        rhs[:, 1:-1] = _field_values(op, f)[:, 1:-1]
    rhs[:, 0] = bottom
    rhs[:, -1] = top
    return StripField(op.grid, op.ny, op.solve_system(rhs, ("dirichlet", float(shift))))


def solve_neumann_dirichlet(op: TransformedOperator, f, top, shift: float = 0.0) -> StripField:
    """Solve ``(A - shift) v = f``, ``v_y' = 0`` at ``y' = 0``, ``v = top`` at ``y' = 1``."""
    rhs = np.zeros((op.nx, op.ny + 1))
    if f is not None:
        first = 0 if op.neumann_source_row else 1
        rhs[:, first:-1] = _field_values(op, f)[:, first:-1]
    rhs[:, -1] = top
    return StripField(op.grid, op.ny, op.solve_system(rhs, ("neumann", float(shift))))


def solve_R(op: TransformedOperator, sigma_bar_1: float, sigma_bar_2: float) -> StripField:
    """Nutrient on the strip: ``A tau = tau``, ``tau = sb1`` on y'=0, ``sb2`` on y'=1."""
    return solve_dirichlet(op, None, sigma_bar_1, sigma_bar_2, shift=1.0)


def solve_ST(op: TransformedOperator, f, k_bc) -> StripField:
    """``q = S(rho) f + T(rho) k``: ``A q = f``, ``q_y' = 0`` on y'=0, ``q = k`` on y'=1."""
    k_bc = np.broadcast_to(np.asarray(k_bc, dtype=float), (op.nx,))
    return solve_neumann_dirichlet(op, f, k_bc)
