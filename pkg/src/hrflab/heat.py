"""Forward and conjugate heat equations on an evolving metric, and the
heat-kernel estimate with its upper-bound verification.

Both solvers are RK4 in time against the trajectory's linearly interpolated
(in squared coefficients) metric.  The kernel source is a periodic Gaussian
mollifier on the symmetry orbit {x = x_y}; the resulting orbit-averaged
kernel never exceeds the true kernel's sup, so a passing bound check is a
necessary-condition verification in the conservative direction.
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
    GridMismatchError,
    apply_laplacian,
    curvature,
)
from .moser import MoserConstants


class HeatError(RuntimeError):
    pass


@dataclass(frozen=True)
class FieldSeries:
    """A field sampled at an increasing list of times on a fixed grid."""

    times: np.ndarray
    fields: tuple[GridField, ...]

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, float))
        object.__setattr__(self, "fields", tuple(self.fields))
        if len(self.fields) != self.times.size:
            raise HeatError("times/fields length mismatch")


def _output_times(traj: Trajectory, s: float, t1: float) -> np.ndarray:
    span = traj.times()
    if s < span[0] - 1e-12 or t1 > span[-1] + 1e-12 or not s < t1:
        raise HeatError(
            f"[{s}, {t1}] outside trajectory span [{span[0]}, {span[-1]}]"
        )
    inner = span[(span > s + 1e-13) & (span < t1 - 1e-13)]
    return np.concatenate([[s], inner, [t1]])


def _solver_dt(traj: Trajectory, cfl: float = 0.2) -> float:
    gxx_max = max(float(np.max(st.geom.gxx())) for st in traj.checkpoints)
    return cfl * traj.geom0.dx**2 / gxx_max


def _rk4_pde(u, t, dt, rhs):
    k1 = rhs(u, t)
    k2 = rhs(u + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = rhs(u + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = rhs(u + dt * k3, t + dt)
    return u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _march(u0, t_start, out_times, rhs, dt, direction=1.0, max_growth=None):
    """March between consecutive output times with uniform RK4 substeps."""
    u = np.asarray(u0, float).copy()
    outs = [u.copy()]
    scale0 = float(np.max(np.abs(u))) + 1e-300
    t = t_start
    for target in out_times[1:]:
        span = abs(target - t)
        nsub = max(1, math.ceil(span / dt))
        h = direction * span / nsub
        for _ in range(nsub):
            u = _rk4_pde(u, t, h, rhs)
            t += h
        t = target if direction > 0 else target
        if not np.all(np.isfinite(u)):
            raise HeatError(f"solution lost finiteness near t = {target:.6g}")
        if max_growth is not None and np.max(np.abs(u)) > max_growth * scale0:
            raise HeatError("backward solve unstable: norm grew beyond tolerance")
        outs.append(u.copy())
    return outs


def heat_forward(traj: Trajectory, u0: GridField, s: float, t1: float) -> FieldSeries:
    """Solve du/dt = Lap_{g(t)} u from time s to t1 along the trajectory."""
    geom0 = traj.geom0
    if u0.N != geom0.N or u0.L != geom0.L:
        raise GridMismatchError("u0 not on the trajectory grid")
    out_times = _output_times(traj, s, t1)
    dt = _solver_dt(traj)

    def rhs(u, t):
        return apply_laplacian(traj.state_at(float(np.clip(t, s, t1))).geom, u)

    outs = _march(u0.values, s, out_times, rhs, dt)
    return FieldSeries(out_times, tuple(GridField(v, geom0.L) for v in outs))


def conjugate_backward(traj: Trajectory, u_end: GridField, t1: float, s: float) -> FieldSeries:
    """Solve the conjugate equation Lap u - S u + du/dt = 0 backward from t1 to s.

    Input is clamped nonnegative and normalized to unit mass in dmu(g(t1))
    (with a warning if the caller's data was off).  Output fields are
    ordered by increasing time, from s to t1.
    """
    geom0 = traj.geom0
    if u_end.N != geom0.N or u_end.L != geom0.L:
        raise GridMismatchError("u_end not on the trajectory grid")
    out_times = _output_times(traj, s, t1)
    vals = u_end.values.copy()
    if np.min(vals) < 0:
        warnings.warn("conjugate_backward: negative nodes clamped to zero")
        vals = np.maximum(vals, 0.0)
    state1 = traj.state_at(t1)
    mass = float(np.sum(state1.geom.node_weights() * vals))
    if mass <= 0:
        raise HeatError("terminal data has nonpositive mass")
    if abs(mass - 1.0) > 1e-12:
        if abs(mass - 1.0) > 1e-9:
            warnings.warn("conjugate_backward: terminal data renormalized to unit mass")
        vals = vals / mass
    dt = _solver_dt(traj)

    def rhs(u, t):
        state = traj.state_at(float(np.clip(t, s, t1)))
        S = curvature(state).S.values
        return S * u - apply_laplacian(state.geom, u)

    # march in decreasing t (stable direction for the conjugate equation)
    back_times = out_times[::-1]
    outs = _march(vals, t1, back_times, rhs, dt, direction=-1.0, max_growth=1e6)
    outs.reverse()
    return FieldSeries(out_times, tuple(GridField(v, geom0.L) for v in outs))


@dataclass(frozen=True)
class HeatKernelEstimate:
    """Orbit-averaged heat-kernel estimate from a mollified point source."""

    y: int
    s: float
    sigma_w: float
    series: FieldSeries
    masses: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.series.times

    @property
    def fields(self) -> tuple[GridField, ...]:
        return self.series.fields

    def resolved(self, t: float) -> bool:
        """Mollifier-resolution criterion t - s >= 10 sigma_w^2."""
        return t - self.s >= 10.0 * self.sigma_w**2


def periodic_gaussian(N: int, L: float, center: float, sigma: float) -> np.ndarray:
    x = np.arange(N) * (L / N)
    out = np.zeros(N)
    for j in range(-3, 4):
        out += np.exp(-((x - center + j * L) ** 2) / (2.0 * sigma**2))
    return out


def heat_kernel(traj: Trajectory, y: int, s: float, sigma_w: float) -> HeatKernelEstimate:
    """Evolve a unit-mass periodic Gaussian centered at node y from time s."""
    geom0 = traj.geom0
    if sigma_w < 2.0 * geom0.dx:
        raise HeatError(f"sigma_w = {sigma_w:g} < 2 dx = {2 * geom0.dx:g}: unresolvable mollifier")
    state_s = traj.state_at(s)
    bump = periodic_gaussian(geom0.N, geom0.L, y * geom0.dx, sigma_w)
    bump /= float(np.sum(state_s.geom.node_weights() * bump))
    series = heat_forward(traj, GridField(bump, geom0.L), s, traj.t_end)
    masses = np.array(
        [
            float(np.sum(traj.state_at(t).geom.node_weights() * f.values))
            for t, f in zip(series.times, series.fields)
        ]
    )
    return HeatKernelEstimate(y=y, s=s, sigma_w=sigma_w, series=series, masses=masses)


@dataclass(frozen=True)
class KernelBoundRow:
    t: float
    sup_g: float
    bound: float
    ratio: float
    included: bool
    passed: bool


@dataclass(frozen=True)
class KernelBoundReport:
    """Necessary-condition check of the kernel upper bound.

    The estimate is the fiber average of the true kernel, whose sup it
    cannot exceed, so every pass here is conservative.
    """

    C: float
    S0: float
    rows: tuple[KernelBoundRow, ...]
    max_ratio: float
    all_pass: bool
    n_excluded: int


def kernel_bound_check(
    est: HeatKernelEstimate,
    traj: Trajectory,
    constants: MoserConstants,
    S0: float = 0.0,
) -> KernelBoundReport:
    """Check sup_x G(x,t) * (t-s)^{n/2} <= C with C assembled from the
    parabolic sup-estimate at p = 1 plus the kernel-mass bound
    (mass <= 1 for S0 = 0, mass <= e^{S0 (t-s)} otherwise)."""
    if S0 < 0:
        raise HeatError("S0 must be nonnegative")
    n = traj.geom0.n
    c1, c2, c0_neg = constants.constants_for_p(1.0)
    half = 0.5 * (n + 2)
    T_span = est.times[-1] - est.s
    if S0 == 0.0:
        C = c2**half
    else:
        C = (c0_neg * S0 * T_span + c2) ** half * (math.expm1(S0 * T_span)) / (S0 * T_span)
    rows = []
    max_ratio = 0.0
    all_pass = True
    n_excluded = 0
    for t, f in zip(est.times, est.fields):
        dt = t - est.s
        sup_g = float(np.max(f.values))
        included = est.resolved(t) and dt > 0
        if not included:
            n_excluded += 1
            rows.append(KernelBoundRow(t, sup_g, math.nan, math.nan, False, True))
            continue
        if S0 == 0.0:
            bound = (c2 / dt) ** half * dt  # integral of unit mass over [s, t]
        else:
            bound = (c0_neg * S0 + c2 / dt) ** half * math.expm1(S0 * dt) / S0
        ratio = sup_g * dt ** (n / 2.0) / C
        ok = sup_g <= bound * (1.0 + 1e-12)
        rows.append(KernelBoundRow(t, sup_g, bound, ratio, True, ok))
        max_ratio = max(max_ratio, ratio)
        all_pass = all_pass and ok
    return KernelBoundReport(C, S0, tuple(rows), max_ratio, all_pass, n_excluded)


def export_kernel_csv(est: HeatKernelEstimate, traj: Trajectory, path) -> None:
    """CSV columns (t, node, x, G, mass), one row per node and time."""
    geom = traj.geom0
    x = geom.x()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "node", "x", "G", "mass"])
        for t, f, m in zip(est.times, est.fields, est.masses):
            for i in range(geom.N):
                writer.writerow([repr(float(t)), i, repr(float(x[i])), repr(float(f.values[i])), repr(float(m))])


# ---------------------------------------------------------------------------
# static constant-coefficient (flat-metric) spectral reference


def _require_static_constant(traj: Trajectory) -> CoupledState:
    st0 = traj.checkpoints[0]
    for st in traj.checkpoints:
        for name, c in st.geom.coeffs.items():
            if np.ptp(c.values) > 1e-12 or abs(c.values[0] - st0.geom.coeffs[name].values[0]) > 1e-10:
                raise HeatError("spectral reference needs a static constant-coefficient metric")
    return st0


def _modes(state: CoupledState, n_modes: int):
    geom = state.geom
    x = geom.x()
    V = geom.volume()
    gxx = float(geom.gxx()[0])
    L = geom.L
    funcs = [np.full(geom.N, 1.0 / math.sqrt(V))]
    lams = [0.0]
    for k in range(1, n_modes + 1):
        lam = gxx * (2.0 * math.pi * k / L) ** 2
        amp = math.sqrt(2.0 / V)
        funcs.append(amp * np.cos(2 * np.pi * k * x / L))
        funcs.append(amp * np.sin(2 * np.pi * k * x / L))
        lams.extend([lam, lam])
    return np.array(funcs), np.array(lams)


def heat_spectral_reference(
    traj: Trajectory, u0: GridField, s: float, t: float, n_modes: int = 64
) -> GridField:
    """Truncated eigenfunction-expansion solution on a static flat metric."""
    state = _require_static_constant(traj)
    funcs, lams = _modes(state, n_modes)
    w = state.geom.node_weights()
    coeffs = funcs @ (w * u0.values)
    out = (coeffs * np.exp(-lams * (t - s))) @ funcs
    return GridField(out, state.geom.L)


def kernel_spectral_reference(
    traj: Trajectory, y: int, s: float, t: float, n_modes: int = 64
) -> GridField:
    """Truncated expansion sum_k e^{-lam_k (t-s)} phi_k(x) phi_k(y) for a
    static flat metric (point source on the orbit through node y)."""
    state = _require_static_constant(traj)
    funcs, lams = _modes(state, n_modes)
    out = (funcs[:, y] * np.exp(-lams * (t - s))) @ funcs
    return GridField(out, state.geom.L)
