"""Eigenvalues and functional-inequality checks on a CoupledState.

Covers the smallest eigenvalue of the weighted operator -4*Lap + S, the
shifted operator A*(-Lap + S/4) + B, sampled Sobolev / log-Sobolev
verification, a projected-gradient minimizer of the Sobolev quotient, and
the dyadic-truncation inequality check.

Quadratic gradient energies are evaluated through the discrete Dirichlet
form of the divergence-stencil Laplacian, so self-adjointness identities
hold exactly; pointwise integrands use centered differences.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import (
    CoupledState,
    GeometryError,
    GridField,
    ReducedGeometry,
    curvature,
    integrate,
    laplace_matrix,
)


class SpectralError(RuntimeError):
    pass


class EigenConvergenceError(SpectralError):
    def __init__(self, message, best: "EigenResult"):
        super().__init__(message)
        self.best = best


class HypothesisError(SpectralError):
    """A stated hypothesis (e.g. pointwise positivity) fails."""


@dataclass(frozen=True)
class EigenResult:
    lam: float
    eigenfield: GridField
    residual: float
    iterations: int
    flagged_nonpositive: bool = False


def dirichlet_energy(state: CoupledState, values: np.ndarray) -> float:
    """int |grad v|^2 dmu via the Laplacian's exact quadratic form."""
    geom = state.geom
    kappa = geom.flux_coeff()
    kap_plus = 0.5 * (kappa + np.roll(kappa, -1))
    dv = np.roll(values, -1) - values
    return float(np.sum(kap_plus * dv**2) * geom.fiber_volume() / geom.dx)


def _weighted_smallest_eigen(
    geom: ReducedGeometry,
    lap_coeff: float,
    potential: np.ndarray,
    shift_const: float = 0.0,
    tol_rel: float = 1e-8,
    tol_abs: float = 1e-10,
    max_iter: int = 500,
) -> EigenResult:
    """Smallest eigenvalue of L = -lap_coeff*Lap + potential + shift_const
    in the node-weight inner product, by shifted inverse power iteration."""
    N = geom.N
    w = geom.node_weights()
    lmat = -lap_coeff * laplace_matrix(geom) + np.diag(potential)
    if shift_const:
        lmat = lmat + shift_const * np.eye(N)

    def wnorm(v):
        return math.sqrt(float(np.sum(w * v * v)))

    sigma = float(np.min(potential)) + shift_const - 1.0
    lu = scipy.linalg.lu_factor(lmat - sigma * np.eye(N))
    v = np.ones(N) + 1e-3 * np.cos(2 * np.pi * np.arange(N) / N)
    v /= wnorm(v)
    lam = float(np.sum(w * v * (lmat @ v)))
    best = None
    for it in range(1, max_iter + 1):
        v = scipy.linalg.lu_solve(lu, v)
        v /= wnorm(v)
        lam = float(np.sum(w * v * (lmat @ v)))
        res = wnorm(lmat @ v - lam * v)
        if best is None or res < best[0]:
            best = (res, lam, v.copy(), it)
        if res <= 0.5 * (tol_rel * abs(lam) + tol_abs):
            return EigenResult(lam, GridField(v, geom.L), res, it)
        # Rayleigh-quotient shift once the iterate has settled
        if res < 1e-3 * (1.0 + abs(lam)) and abs(lam - sigma) > 10 * res:
            sigma = lam - max(10.0 * res, 1e-10)
            lu = scipy.linalg.lu_factor(lmat - sigma * np.eye(N))
    res, lam, v, it = best
    raise EigenConvergenceError(
        f"inverse iteration stalled at residual {res:g}",
        EigenResult(lam, GridField(v, geom.L), res, max_iter),
    )


def f_entropy_lambda0(state: CoupledState) -> EigenResult:
    """Smallest eigenvalue of -4*Lap + S: the ground level of the coupled
    Dirichlet-type energy int(4|grad v|^2 + S v^2) over unit-mass v."""
    S = curvature(state).S.values
    return _weighted_smallest_eigen(state.geom, 4.0, S)


def lambda1_W(state: CoupledState, A: float, B: float) -> EigenResult:
    """Smallest eigenvalue of A*(-Lap + S/4) + B; flagged when nonpositive."""
    if not A > 0:
        raise SpectralError("A must be positive")
    S = curvature(state).S.values
    res = _weighted_smallest_eigen(state.geom, A, A * S / 4.0 + B)
    if res.lam <= 0:
        return EigenResult(res.lam, res.eigenfield, res.residual, res.iterations, True)
    return res


def sobolev_exponent(n: int) -> float:
    return 2.0 * n / (n - 2.0)


def sobolev_sides(state: CoupledState, A: float, B: float, values: np.ndarray,
                  S: np.ndarray | None = None) -> tuple[float, float]:
    """(LHS, RHS) of the L^2 Sobolev inequality for one field."""
    geom = state.geom
    if S is None:
        S = curvature(state).S.values
    q = sobolev_exponent(geom.n)
    w = geom.node_weights()
    lhs = float(np.sum(w * np.abs(values) ** q)) ** (2.0 / q)
    v2 = float(np.sum(w * values**2))
    rhs = A * (dirichlet_energy(state, values) + 0.25 * float(np.sum(w * S * values**2))) + B * v2
    return lhs, rhs


@dataclass(frozen=True)
class SobolevReport:
    A_used: float
    B_used: float
    observed_min_quotient: float
    family_size: int
    violations: int
    seed: int | None = None
    predicted: tuple[float, float] | None = None


def sobolev_check(
    state: CoupledState,
    A: float,
    B: float,
    family: list[GridField],
    seed: int | None = None,
    predicted: tuple[float, float] | None = None,
) -> SobolevReport:
    """Evaluate the Sobolev inequality on every member of a test family."""
    if not family:
        raise SpectralError("empty test family")
    S = curvature(state).S.values
    min_q = math.inf
    violations = 0
    for v in family:
        if not np.any(v.values):
            raise SpectralError("family member identically zero")
        lhs, rhs = sobolev_sides(state, A, B, v.values, S)
        ratio = rhs / lhs
        min_q = min(min_q, ratio)
        if lhs > rhs * (1.0 + 1e-12):
            violations += 1
    return SobolevReport(A, B, min_q, len(family), violations, seed, predicted)


def minimize_sobolev_quotient(
    state: CoupledState,
    A: float,
    B: float,
    v0: np.ndarray | None = None,
    max_iter: int = 500,
) -> tuple[float, GridField]:
    """Projected gradient descent on RHS/LHS of the Sobolev inequality.

    Returns the smallest quotient found (>= 1 everywhere means no violation
    was found within the iteration cap) and the minimizing field.
    """
    S = curvature(state).S.values
    return minimize_sobolev_quotient_shifted(state, A, B, S, v0, max_iter)


def log_sobolev_residual(
    state: CoupledState,
    v: GridField,
    eps: float,
    A0: float,
    B0: float,
    t: float,
) -> float:
    """RHS minus LHS of the evolving log-Sobolev inequality; >= 0 means it holds.

    LHS = int v^2 ln v^2, RHS = eps^2 int(4|grad v|^2 + S v^2) - n ln(2 eps)
    + 4 (t + eps^2) B0/A0 + (n/2) ln(n A0 / (2e)), for unit-L^2 v.
    """
    if not eps > 0:
        raise SpectralError("eps must be positive")
    vals = v.values
    if not np.any(vals):
        raise SpectralError("v is identically zero")
    geom = state.geom
    n = geom.n
    w = geom.node_weights()
    norm2 = float(np.sum(w * vals**2))
    if abs(norm2 - 1.0) > 1e-10:
        warnings.warn("log_sobolev_residual: input not unit-normalized; renormalizing")
        vals = vals / math.sqrt(norm2)
    S = curvature(state).S.values
    v2 = vals**2
    lhs = float(np.sum(w * np.where(v2 > 0, v2 * np.log(np.maximum(v2, 1e-300)), 0.0)))
    energy = 4.0 * dirichlet_energy(state, vals) + float(np.sum(w * S * v2))
    rhs = (
        eps**2 * energy
        - n * math.log(2.0 * eps)
        + 4.0 * (t + eps**2) * B0 / A0
        + 0.5 * n * math.log(n * A0 / (2.0 * math.e))
    )
    return rhs - lhs


@dataclass(frozen=True)
class TruncationReport:
    lhs_sum: float
    rhs: float
    grad_identity_residual: float
    levels: tuple[int, ...]


def _w_squared(state: CoupledState, A: float, B: float, vals: np.ndarray, S: np.ndarray) -> float:
    w = state.geom.node_weights()
    return (
        A * (dirichlet_energy(state, vals) + 0.25 * float(np.sum(w * S * vals**2)))
        + B * float(np.sum(w * vals**2))
    )


def truncation_claim_check(state: CoupledState, f: GridField, A: float, B: float) -> TruncationReport:
    """Dyadic truncation family f_k = min{(f - 2^k)^+, 2^k}: compares
    sum_k W(f_k)^2 against W(f)^2 and reports the gradient-sum identity residual.

    Requires (A/4) S + B >= 0 pointwise and f >= 0.
    """
    vals = f.values
    if np.min(vals) < 0:
        raise SpectralError("f must be nonnegative")
    S = curvature(state).S.values
    hyp = A / 4.0 * S + B
    if np.min(hyp) < 0:
        worst = int(np.argmin(hyp))
        raise HypothesisError(
            f"(A/4) S + B < 0 at node {worst} (value {hyp[worst]:g})"
        )
    fmax = float(np.max(vals))
    if fmax == 0.0:
        return TruncationReport(0.0, 0.0, 0.0, ())
    k_hi = math.ceil(math.log2(fmax)) - 1
    k_lo = k_hi - 12  # levels below max(f)*2^-12 contribute negligibly
    lhs = 0.0
    grad_sum = 0.0
    levels = []
    for k in range(k_lo, k_hi + 1):
        lvl = 2.0**k
        fk = np.minimum(np.maximum(vals - lvl, 0.0), lvl)
        if not np.any(fk):
            continue
        levels.append(k)
        lhs += _w_squared(state, A, B, fk, S)
        grad_sum += dirichlet_energy(state, fk)
    rhs = _w_squared(state, A, B, vals, S)
    residual = dirichlet_energy(state, vals) - grad_sum
    return TruncationReport(lhs, rhs, residual, tuple(levels))


# ---------------------------------------------------------------------------
# seeded test families (counter-based generator for reproducibility)


def _rng(seed: int, counter: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def trig_family(
    N: int, L: float, size: int, seed: int, n_modes: int = 3, counter: int = 0
) -> list[GridField]:
    """Random trigonometric polynomials with standard-normal coefficients."""
    rng = _rng(seed, counter)
    x = np.arange(N) * (L / N)
    out = []
    for _ in range(size):
        v = rng.standard_normal() * np.ones(N)
        for k in range(1, n_modes + 1):
            a, b = rng.standard_normal(2)
            v = v + a * np.cos(2 * np.pi * k * x / L) + b * np.sin(2 * np.pi * k * x / L)
        if not np.any(v):
            v = np.ones(N)
        out.append(GridField(v, L))
    return out


def bump_family(
    N: int, L: float, size: int, seed: int, counter: int = 1
) -> list[GridField]:
    """Periodic Gaussian bumps with random centers and widths in [0.15, 0.6] L."""
    rng = _rng(seed, counter)
    x = np.arange(N) * (L / N)
    out = []
    for _ in range(size):
        center = rng.uniform(0.0, L)
        width = rng.uniform(0.15, 0.6) * L / (2 * np.pi)
        v = np.zeros(N)
        for j in (-2, -1, 0, 1, 2):
            v = v + np.exp(-((x - center + j * L) ** 2) / (2.0 * width**2))
        out.append(GridField(v, L))
    return out


def estimate_initial_constants(
    state: CoupledState, seed: int = 0, safety: float = 2.0, family_size: int = 40
) -> tuple[float, float]:
    """Calibrate valid initial Sobolev constants (A0, B0) on a fixed state.

    Works with the nonnegative shift S + S0 (S0 = max(0, -min S)); a valid
    pair for the shifted potential converts to a valid pair for S itself by
    absorbing A0*S0/4 into B0.  Candidates from a sampled family are
    inflated by ``safety`` and validated with the quotient minimizer.
    """
    geom = state.geom
    S = curvature(state).S.values
    s0_neg = max(0.0, -float(np.min(S)))
    S_pos = S + s0_neg
    vol = geom.volume()
    B_pos = 1.01 * vol ** (-2.0 / geom.n)
    w = geom.node_weights()
    q = sobolev_exponent(geom.n)

    family = trig_family(geom.N, geom.L, family_size, seed) + bump_family(
        geom.N, geom.L, family_size // 2, seed
    )
    A_cand = 0.1
    for v in family:
        vals = v.values
        lhs = float(np.sum(w * np.abs(vals) ** q)) ** (2.0 / q)
        v2 = float(np.sum(w * vals**2))
        denom = dirichlet_energy(state, vals) + 0.25 * float(np.sum(w * S_pos * vals**2))
        if denom > 1e-12 * v2:
            need = (lhs - B_pos * v2) / denom
            A_cand = max(A_cand, need)
    A_cand *= safety

    for _ in range(8):
        worst = None
        worst_r = math.inf
        for v in family:
            lhs, rhs = sobolev_sides(state, A_cand, B_pos, v.values, S_pos)
            if rhs / lhs < worst_r:
                worst_r, worst = rhs / lhs, v.values
        r_min, _ = minimize_sobolev_quotient_shifted(state, A_cand, B_pos, S_pos, worst)
        if r_min >= 1.05:
            break
        A_cand *= 2.0
    return A_cand, B_pos + A_cand * s0_neg / 4.0


def minimize_sobolev_quotient_shifted(
    state: CoupledState,
    A: float,
    B: float,
    S: np.ndarray,
    v0: np.ndarray | None = None,
    max_iter: int = 500,
) -> tuple[float, GridField]:
    """Quotient minimizer against an explicitly supplied potential field."""
    geom = state.geom
    N = geom.N
    w = geom.node_weights()
    q = sobolev_exponent(geom.n)
    qmat = w[:, None] * (A * (-laplace_matrix(geom) + np.diag(S / 4.0)) + B * np.eye(N))
    qmat = 0.5 * (qmat + qmat.T)

    def qnorm_pow(v):
        return float(np.sum(w * np.abs(v) ** q))

    def ratio_and_grad(v):
        num = float(v @ (qmat @ v))
        P = qnorm_pow(v)
        den = P ** (2.0 / q)
        g_num = 2.0 * (qmat @ v)
        g_den = 2.0 * P ** (2.0 / q - 1.0) * w * np.abs(v) ** (q - 2.0) * v
        return num / den, (g_num * den - num * g_den) / den**2

    v = np.ones(N) if v0 is None else np.asarray(v0, float).copy()
    v = v / qnorm_pow(v) ** (1.0 / q)
    r, g = ratio_and_grad(v)
    eta = 0.1 / (np.max(np.abs(g)) + 1e-30)
    for _ in range(max_iter):
        v_try = v - eta * g
        v_try = v_try / qnorm_pow(v_try) ** (1.0 / q)
        r_try, g_try = ratio_and_grad(v_try)
        if r_try < r:
            v, r, g = v_try, r_try, g_try
            eta *= 1.2
        else:
            eta *= 0.5
            if eta < 1e-16:
                break
    return r, GridField(v, geom.L)
