"""Symmetry-reduced closed manifolds and their differential operators.

Two cohomogeneity-one families are supported, both parametrized by a single
periodic coordinate x in [0, L):

* ``warped_circle_sphere``: g = f_rad(x)^2 dx^2 + h(x)^2 g_{S^{n-1}},
  a circle base warped over a round (n-1)-sphere fiber;
* ``diagonal_torus`` (n = 3): g = a(x)^2 dx^2 + b(x)^2 dy^2 + c(x)^2 dz^2
  on T^3 with fiber periods (L_y, L_z).

All fields are sampled on a uniform periodic grid.  The Laplace-Beltrami
operator uses a staggered divergence-form stencil, which makes the discrete
operator exactly self-adjoint in the volume-weighted inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

WARPED_CIRCLE_SPHERE = "warped_circle_sphere"
DIAGONAL_TORUS = "diagonal_torus"

BACKENDS = (WARPED_CIRCLE_SPHERE, DIAGONAL_TORUS)


class GeometryError(ValueError):
    """Base class for geometry construction/validation failures."""


class DegenerateMetricError(GeometryError):
    """A metric coefficient is non-positive somewhere."""


class UnsupportedDimensionError(GeometryError):
    """Manifold dimension below 3 (the Sobolev exponent needs n >= 3)."""


class GridMismatchError(GeometryError):
    """A field does not live on the geometry's grid."""


def sphere_volume(n_minus_1: int) -> float:
    """Volume of the round unit sphere S^{n-1}: 2 pi^{n/2} / Gamma(n/2)."""
    n = n_minus_1 + 1
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class GridField:
    """Samples of a periodic function of x on a uniform grid of period L."""

    values: np.ndarray
    L: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 8:
            raise GeometryError("GridField needs a 1-d array with N >= 8")
        if not np.all(np.isfinite(vals)):
            raise GeometryError("GridField values must be finite")
        if not self.L > 0:
            raise GeometryError("period L must be positive")

    @property
    def N(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return self.L / self.N

    def x(self) -> np.ndarray:
        return np.arange(self.N) * self.dx


def d1(values: np.ndarray, dx: float) -> np.ndarray:
    """Second-order centered first derivative on the periodic grid."""
    return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * dx)


def d2(values: np.ndarray, dx: float) -> np.ndarray:
    """Second-order centered second derivative on the periodic grid."""
    return (np.roll(values, -1) - 2.0 * values + np.roll(values, 1)) / dx**2


@dataclass(frozen=True)
class ReducedGeometry:
    """Discrete metric of one of the reduced families.

    ``coeffs`` maps coefficient names to GridFields: (f_rad, h) for the
    warped circle-sphere, (a, b, c) for the diagonal torus.  For the torus
    ``fiber_periods`` carries (L_y, L_z).
    """

    backend: str
    n: int
    coeffs: dict[str, GridField]
    fiber_periods: tuple[float, float] | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise GeometryError(f"unknown backend {self.backend!r}")
        if self.n < 3:
            raise UnsupportedDimensionError(
                f"n = {self.n} < 3: the Sobolev exponent 2n/(n-2) needs n >= 3"
            )
        expected = ("f_rad", "h") if self.backend == WARPED_CIRCLE_SPHERE else ("a", "b", "c")
        if tuple(sorted(self.coeffs)) != tuple(sorted(expected)):
            raise GeometryError(f"backend {self.backend} needs coefficients {expected}")
        if self.backend == DIAGONAL_TORUS and self.n != 3:
            raise UnsupportedDimensionError("diagonal_torus is a 3-manifold")
        ref = next(iter(self.coeffs.values()))
        for name, c in self.coeffs.items():
            if c.N != ref.N or c.L != ref.L:
                raise GridMismatchError("metric coefficients must share one grid")
            if np.min(c.values) <= 0.0:
                raise DegenerateMetricError(
                    f"coefficient {name!r} non-positive (min {np.min(c.values):g})"
                )
        if self.backend == DIAGONAL_TORUS and self.fiber_periods is None:
            object.__setattr__(self, "fiber_periods", (2.0 * math.pi, 2.0 * math.pi))

    @property
    def N(self) -> int:
        return next(iter(self.coeffs.values())).N

    @property
    def L(self) -> float:
        return next(iter(self.coeffs.values())).L

    @property
    def dx(self) -> float:
        return self.L / self.N

    def x(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    def radial_coeff(self) -> np.ndarray:
        """The dx^2 coefficient (f_rad or a)."""
        key = "f_rad" if self.backend == WARPED_CIRCLE_SPHERE else "a"
        return self.coeffs[key].values

    def fiber_multiplicities(self) -> tuple[int, ...]:
        """Dimension of each distinct fiber eigen-family."""
        if self.backend == WARPED_CIRCLE_SPHERE:
            return (self.n - 1,)
        return (1, 1)

    def fiber_volume(self) -> float:
        """Measure of the fiber over one base point at unit warping."""
        if self.backend == WARPED_CIRCLE_SPHERE:
            return sphere_volume(self.n - 1)
        ly, lz = self.fiber_periods
        return ly * lz

    def density(self) -> np.ndarray:
        """Volume density per dx (without the constant fiber factor)."""
        if self.backend == WARPED_CIRCLE_SPHERE:
            return self.coeffs["f_rad"].values * self.coeffs["h"].values ** (self.n - 1)
        return self.coeffs["a"].values * self.coeffs["b"].values * self.coeffs["c"].values

    def gxx(self) -> np.ndarray:
        """Inverse metric component g^{xx}."""
        return 1.0 / self.radial_coeff() ** 2

    def flux_coeff(self) -> np.ndarray:
        """density * g^{xx}, the divergence-form flux coefficient."""
        return self.density() * self.gxx()

    def volume(self) -> float:
        return float(np.sum(self.density()) * self.dx * self.fiber_volume())

    def node_weights(self) -> np.ndarray:
        """Quadrature weights: integral of u dmu = sum(w * u)."""
        return self.density() * self.dx * self.fiber_volume()


@dataclass(frozen=True)
class CoupledState:
    """The discrete (g, phi) pair at one instant, with the current alpha."""

    geom: ReducedGeometry
    phi: tuple[GridField, ...]
    t: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(self.phi))
        if not self.alpha > 0:
            raise GeometryError("alpha must be positive")
        for p in self.phi:
            if p.N != self.geom.N or p.L != self.geom.L:
                raise GridMismatchError("phi components must share the geometry grid")

    @property
    def N(self) -> int:
        return self.geom.N

    def grid_field(self, values: np.ndarray) -> GridField:
        return GridField(values, self.geom.L)


@dataclass(frozen=True)
class CurvatureReport:
    """Per-node curvature of a CoupledState in the reduced orthonormal frame.

    ``ric_fiber`` / ``s_fiber`` hold one field per distinct fiber family
    (one for the warped circle-sphere, two for the diagonal torus), with
    multiplicities from the geometry.
    """

    ric_radial: GridField
    ric_fiber: tuple[GridField, ...]
    R: GridField
    s_radial: GridField
    s_fiber: tuple[GridField, ...]
    S: GridField
    fiber_multiplicities: tuple[int, ...]


def _check_grid(geom: ReducedGeometry, u: GridField) -> None:
    if u.N != geom.N or u.L != geom.L:
        raise GridMismatchError(f"field on N={u.N}, L={u.L} vs geometry N={geom.N}, L={geom.L}")


def build_geometry(backend: str, n: int, N: int, L: float, initializers: dict) -> ReducedGeometry:
    """Sample coefficient initializers (scalars, arrays or callables of x) on the grid.

    ``initializers`` may also carry ``fiber_periods`` for the torus backend.
    """
    if N < 8:
        raise GeometryError(f"N = {N} < 8")
    x = np.arange(N) * (L / N)
    init = dict(initializers)
    fiber_periods = init.pop("fiber_periods", None)
    coeffs = {}
    for name, spec in init.items():
        if callable(spec):
            vals = np.broadcast_to(np.asarray(spec(x), dtype=float), (N,)).copy()
        else:
            vals = np.broadcast_to(np.asarray(spec, dtype=float), (N,)).copy()
        coeffs[name] = GridField(vals, L)
    return ReducedGeometry(backend=backend, n=n, coeffs=coeffs, fiber_periods=fiber_periods)


def phi_gradient_sq(state: CoupledState) -> np.ndarray:
    """|grad phi|^2 = g^{xx} sum_m (phi_m')^2 per node."""
    geom = state.geom
    out = np.zeros(geom.N)
    for p in state.phi:
        out += d1(p.values, geom.dx) ** 2
    return out * geom.gxx()


def curvature(state: CoupledState) -> CurvatureReport:
    """Ricci components, scalar curvature, and the coupled tensor S in the reduced frame."""
    geom = state.geom
    dx = geom.dx
    mults = geom.fiber_multiplicities()
    if geom.backend == WARPED_CIRCLE_SPHERE:
        f = geom.coeffs["f_rad"].values
        h = geom.coeffs["h"].values
        n = geom.n
        h_s = d1(h, dx) / f
        h_ss = (d2(h, dx) * f - d1(h, dx) * d1(f, dx)) / f**3
        ric_rad = -(n - 1) * h_ss / h
        ric_fib = -h_ss / h - (n - 2) * (h_s**2 - 1.0) / h**2
        fibers = (ric_fib,)
    else:
        a = geom.coeffs["a"].values
        b = geom.coeffs["b"].values
        c = geom.coeffs["c"].values
        b_s = d1(b, dx) / a
        c_s = d1(c, dx) / a
        b_ss = (d2(b, dx) * a - d1(b, dx) * d1(a, dx)) / a**3
        c_ss = (d2(c, dx) * a - d1(c, dx) * d1(a, dx)) / a**3
        ric_rad = -(b_ss / b + c_ss / c)
        cross = b_s * c_s / (b * c)
        fibers = (-b_ss / b - cross, -c_ss / c - cross)
    R = ric_rad + sum(m * fib for m, fib in zip(mults, fibers))
    grad_phi_sq = phi_gradient_sq(state)
    # grad phi has only a radial frame component, so S differs from Ric
    # in the radial slot alone.
    s_rad = ric_rad - state.alpha * grad_phi_sq
    S = R - state.alpha * grad_phi_sq
    gf = state.grid_field
    return CurvatureReport(
        ric_radial=gf(ric_rad),
        ric_fiber=tuple(gf(v) for v in fibers),
        R=gf(R),
        s_radial=gf(s_rad),
        s_fiber=tuple(gf(v) for v in fibers),
        S=gf(S),
        fiber_multiplicities=mults,
    )


def laplace_beltrami(state: CoupledState, u: GridField) -> GridField:
    """Divergence-form Laplace-Beltrami of an x-only function.

    Delta u = (1/rho) D_-(kappa_{i+1/2} D_+ u) with kappa = rho g^{xx}
    averaged onto half nodes; exactly self-adjoint against node_weights.
    """
    geom = state.geom
    _check_grid(geom, u)
    return state.grid_field(apply_laplacian(geom, u.values))


def apply_laplacian(geom: ReducedGeometry, values: np.ndarray) -> np.ndarray:
    kappa = geom.flux_coeff()
    kap_plus = 0.5 * (kappa + np.roll(kappa, -1))  # between i and i+1
    flux_plus = kap_plus * (np.roll(values, -1) - values)
    return (flux_plus - np.roll(flux_plus, 1)) / (geom.density() * geom.dx**2)


def laplace_matrix(geom: ReducedGeometry) -> np.ndarray:
    """Dense matrix of the discrete Laplace-Beltrami operator."""
    N = geom.N
    kappa = geom.flux_coeff()
    kap_plus = 0.5 * (kappa + np.roll(kappa, -1))
    rho = geom.density()
    mat = np.zeros((N, N))
    idx = np.arange(N)
    up = (idx + 1) % N
    dn = (idx - 1) % N
    mat[idx, up] += kap_plus / (rho * geom.dx**2)
    mat[idx, idx] -= kap_plus / (rho * geom.dx**2)
    mat[idx, dn] += np.roll(kap_plus, 1) / (rho * geom.dx**2)
    mat[idx, idx] -= np.roll(kap_plus, 1) / (rho * geom.dx**2)
    return mat


def hessian_radial(state: CoupledState, u: GridField) -> tuple[GridField, tuple[GridField, ...]]:
    """Frame components of the Hessian of an x-only function.

    Returns (radial-radial component, per-fiber-family components).
    """
    geom = state.geom
    _check_grid(geom, u)
    dx = geom.dx
    f = geom.radial_coeff()
    du = d1(u.values, dx)
    hess_rad = (d2(u.values, dx) * f - du * d1(f, dx)) / f**3
    if geom.backend == WARPED_CIRCLE_SPHERE:
        h = geom.coeffs["h"].values
        fibers = (d1(h, dx) / (h * f**2) * du,)
    else:
        b = geom.coeffs["b"].values
        c = geom.coeffs["c"].values
        fibers = (d1(b, dx) / (b * f**2) * du, d1(c, dx) / (c * f**2) * du)
    gf = state.grid_field
    return gf(hess_rad), tuple(gf(v) for v in fibers)


def integrate(state: CoupledState, u: GridField) -> float:
    """Quadrature of u against the volume measure dmu(g)."""
    _check_grid(state.geom, u)
    return float(np.sum(state.geom.node_weights() * u.values))


def grad_norm_sq(state: CoupledState, u: GridField) -> GridField:
    """|grad u|^2 = g^{xx} (u')^2 with centered differences."""
    geom = state.geom
    _check_grid(geom, u)
    return state.grid_field(geom.gxx() * d1(u.values, geom.dx) ** 2)


def frame_norm_sq(
    geom: ReducedGeometry,
    rad: np.ndarray,
    fibers: tuple[np.ndarray, ...],
) -> np.ndarray:
    """|T|^2 for a frame-diagonal symmetric 2-tensor with the given components."""
    out = rad**2
    for m, fib in zip(geom.fiber_multiplicities(), fibers):
        out = out + m * fib**2
    return out
