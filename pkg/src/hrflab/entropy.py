"""Perelman-type entropy of conjugate-heat solutions along the flow.

The entropy of (g, u, tau) is

    W = int [ tau (S u + |grad u|^2 / u) - u ln u - (n/2) ln(4 pi tau) u - n u ] dmu,

with conventions 0 ln 0 = 0 and |grad u|^2/u = 0 where u vanishes.  Its time
derivative along a conjugate solution with d tau/dt = -1 is

    dW/dt = int ( 2 tau |S_y + Hess f - g/(2 tau)|^2
                  + 2 tau alpha |tension(phi) - <grad phi, grad f>|^2
                  - tau alpha' |grad phi|^2 ) u dmu,

with f = -ln u - (n/2) ln(4 pi tau), which is nonnegative whenever alpha is
non-increasing.  Both sides are evaluated independently here: the value by
quadrature of W at checkpoints (finite-differenced in t), the right side by
assembling the integrand from curvature, Hessian, and tension fields.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .flow import Trajectory
from .geometry import (
    CoupledState,
    GridField,
    apply_laplacian,
    curvature,
    d1,
    frame_norm_sq,
    hessian_radial,
    phi_gradient_sq,
)
from .heat import conjugate_backward, periodic_gaussian

U_FLOOR_FRAC = 1e-14  # nodes with u below this fraction of max u are delicate


class EntropyError(RuntimeError):
    pass


class MonotonicityError(EntropyError):
    """The entropy series decreased beyond tolerance."""


@dataclass(frozen=True)
class EntropyRecord:
    t: float
    tau: float
    W: float
    dW_fd: float
    dW_rhs: float
    lambda0: float
    mass: float


def _normalized(state: CoupledState, u: GridField) -> np.ndarray:
    vals = np.maximum(u.values, 0.0)
    mass = float(np.sum(state.geom.node_weights() * vals))
    if mass <= 0:
        raise EntropyError("u has nonpositive mass")
    if abs(mass - 1.0) > 1e-6:
        warnings.warn("entropy input renormalized to unit mass")
    return vals / mass


def w_entropy(state: CoupledState, u: GridField, tau: float) -> float:
    """Entropy value of (g, u, tau) by quadrature of the pointwise integrand."""
    if not tau > 0:
        raise EntropyError("tau must be positive")
    geom = state.geom
    vals = _normalized(state, u)
    S = curvature(state).S.values
    du = d1(vals, geom.dx)
    grad_sq = geom.gxx() * du**2
    grad_term = np.where(vals > 0, grad_sq / np.maximum(vals, 1e-300), 0.0)
    ulogu = np.where(vals > 0, vals * np.log(np.maximum(vals, 1e-300)), 0.0)
    n = geom.n
    integrand = tau * (S * vals + grad_term) - ulogu - (0.5 * n * math.log(4 * math.pi * tau) + n) * vals
    return float(np.sum(geom.node_weights() * integrand))


def w_derivative_rhs(state: CoupledState, u: GridField, tau: float, alpha_dot: float) -> float:
    """Right side of the entropy monotonicity formula at one instant."""
    if not tau > 0:
        raise EntropyError("tau must be positive")
    geom = state.geom
    vals = _normalized(state, u)
    umax = float(np.max(vals))
    if umax <= 0:
        raise EntropyError("u vanishes identically")
    # f = -ln u - (n/2) ln(4 pi tau); a floor keeps logs finite where u is
    # tiny, and the true u weight suppresses those nodes in the quadrature.
    u_eff = np.maximum(vals, U_FLOOR_FRAC * umax)
    f_vals = -np.log(u_eff) - 0.5 * geom.n * math.log(4 * math.pi * tau)
    f_field = GridField(f_vals, geom.L)
    rep = curvature(state)
    hess_rad, hess_fib = hessian_radial(state, f_field)
    half_inv_tau = 1.0 / (2.0 * tau)
    t_rad = rep.s_radial.values + hess_rad.values - half_inv_tau
    t_fibs = tuple(
        sf.values + hf.values - half_inv_tau for sf, hf in zip(rep.s_fiber, hess_fib)
    )
    tensor_sq = frame_norm_sq(geom, t_rad, t_fibs)
    df = d1(f_vals, geom.dx)
    gxx = geom.gxx()
    map_defect_sq = np.zeros(geom.N)
    for p in state.phi:
        tension = apply_laplacian(geom, p.values)
        map_defect_sq += (tension - gxx * d1(p.values, geom.dx) * df) ** 2
    grad_phi_sq = phi_gradient_sq(state)
    integrand = (
        2.0 * tau * tensor_sq + 2.0 * tau * state.alpha * map_defect_sq - tau * alpha_dot * grad_phi_sq
    ) * vals
    return float(np.sum(geom.node_weights() * integrand))


def w_series(
    traj: Trajectory,
    eps: float,
    t0: float,
    center_node: int | None = None,
    width: float | None = None,
    lambda0_fn=None,
    monotonicity_tol: float | None = 1e-6,
) -> list[EntropyRecord]:
    """Entropy time series along a conjugate solution ending in a bump at t0.

    tau(t) = eps^2 + t0 - t.  The terminal datum is a normalized periodic
    Gaussian (width defaults to L/8) at ``center_node``.  dW_fd is a
    centered difference of W over the checkpoint times (NaN at the ends);
    dW_rhs is the monotonicity-formula integrand.  With ``monotonicity_tol``
    set, a decrease of W beyond that tolerance raises MonotonicityError.
    """
    from .spectral import f_entropy_lambda0

    if not eps > 0:
        raise EntropyError("eps must be positive")
    span = traj.times()
    if not (span[0] < t0 <= span[-1] + 1e-12):
        raise EntropyError("t0 outside trajectory span")
    geom0 = traj.geom0
    if center_node is None:
        center_node = geom0.N // 2
    if width is None:
        width = geom0.L / 8.0
    state_t0 = traj.state_at(t0)
    bump = periodic_gaussian(geom0.N, geom0.L, center_node * geom0.dx, width)
    bump /= float(np.sum(state_t0.geom.node_weights() * bump))
    series = conjugate_backward(traj, GridField(bump, geom0.L), t0, span[0])

    if lambda0_fn is None:
        lambda0_fn = lambda st: f_entropy_lambda0(st).lam

    times = series.times
    ws, taus, rhss, lams, masses = [], [], [], [], []
    for t, u in zip(times, series.fields):
        state = traj.state_at(float(t))
        tau = eps**2 + t0 - float(t)
        taus.append(tau)
        ws.append(w_entropy(state, u, tau))
        rhss.append(
            w_derivative_rhs(state, u, tau, traj.schedule.derivative(float(t)))
        )
        lams.append(float(lambda0_fn(state)))
        masses.append(float(np.sum(state.geom.node_weights() * u.values)))

    records = []
    for i, t in enumerate(times):
        if 0 < i < len(times) - 1:
            dw_fd = (ws[i + 1] - ws[i - 1]) / (times[i + 1] - times[i - 1])
        else:
            dw_fd = math.nan
        records.append(
            EntropyRecord(float(t), taus[i], ws[i], dw_fd, rhss[i], lams[i], masses[i])
        )
    if monotonicity_tol is not None:
        diffs = np.diff(ws)
        if np.min(diffs) < -monotonicity_tol:
            raise MonotonicityError(
                f"entropy decreased by {-np.min(diffs):g} between checkpoints"
            )
    return records


def sobolev_constants_predict(
    t: float,
    A0: float,
    B0: float,
    S0: float,
    lambda1_0: float,
    s_param: float = 1.0,
    n: int = 3,
) -> tuple[float, float]:
    """Uniform Sobolev constants at time t from the initial pair (A0, B0).

    A(t) = (2^q - 1)^{2/q} * 2^{2(q-s)/(2-s)} * e^{8 t B0/(n A0)}
           * (1 + A0 S0 / (4 lambda1_0)) * A0,  q = 2n/(n-2),
    and B(t) analogously with B0.  S0 is the nonnegative part of the initial
    lower bound of -S; the S0 = 0, B0 = 0 branch is time-independent.
    """
    if not (A0 > 0 and B0 >= 0):
        raise EntropyError("need A0 > 0 and B0 >= 0")
    if S0 < 0:
        raise EntropyError("S0 must be nonnegative")
    if not lambda1_0 > 0:
        raise EntropyError("lambda1(0) must be positive")
    if not 0 < s_param < 2:
        raise EntropyError("s_param must lie in (0, 2)")
    q = 2.0 * n / (n - 2.0)
    base = (
        (2.0**q - 1.0) ** (2.0 / q)
        * 2.0 ** (2.0 * (q - s_param) / (2.0 - s_param))
        * math.exp(8.0 * t * B0 / (n * A0))
        * (1.0 + A0 * S0 / (4.0 * lambda1_0))
    )
    return base * A0, base * B0


def export_entropy_csv(records: list[EntropyRecord], path) -> None:
    """CSV columns (t, tau, W, dW_fd, dW_rhs, lambda0, mass)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "tau", "W", "dW_fd", "dW_rhs", "lambda0", "mass"])
        for r in records:
            writer.writerow(
                [repr(r.t), repr(r.tau), repr(r.W), repr(r.dW_fd), repr(r.dW_rhs), repr(r.lambda0), repr(r.mass)]
            )
