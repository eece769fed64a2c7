"""Time integration of the coupled metric/map evolution in the reduced ansatz.

The evolved variables are the *squared* metric coefficients (h^2, a^2, ...)
and the map components, so positivity of the metric is natural and the
radial/fiber rates are exactly the quantities the evolution prescribes in
the reduced frame.  Integration is explicit RK4 with step-doubling error
control; a metric-coefficient floor serves as the blow-up detector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DIAGONAL_TORUS,
    WARPED_CIRCLE_SPHERE,
    CoupledState,
    GeometryError,
    GridField,
    ReducedGeometry,
    apply_laplacian,
    curvature,
    d1,
)


class FlowError(RuntimeError):
    """Base class for integration failures."""


class BlowUpError(FlowError):
    """Metric already degenerate at the initial time."""


class IntegrationFailureError(FlowError):
    """NaN encountered; carries the last good state."""

    def __init__(self, message: str, last_state: CoupledState | None = None):
        super().__init__(message)
        self.last_state = last_state


ALPHA_KINDS = ("constant", "linear_clamped", "exponential_decay")


@dataclass(frozen=True)
class AlphaSchedule:
    """Positive non-increasing coupling schedule alpha(t).

    kinds: ``constant`` alpha0; ``linear_clamped`` max(alpha0 - rate*t, floor);
    ``exponential_decay`` floor + (alpha0 - floor) * exp(-rate*t).
    """

    kind: str = "constant"
    alpha0: float = 1.0
    rate: float = 0.0
    floor: float = 1e-6

    def __post_init__(self):
        if self.kind not in ALPHA_KINDS:
            raise ValueError(f"unknown alpha schedule kind {self.kind!r}")
        if not (self.alpha0 > 0 and self.rate >= 0 and self.floor > 0):
            raise ValueError("need alpha0 > 0, rate >= 0, floor > 0")
        if self.kind != "constant" and self.floor > self.alpha0:
            raise ValueError("floor must not exceed alpha0")

    def eval(self, t: float) -> float:
        if t < 0:
            raise ValueError(f"alpha schedule evaluated at t = {t} < 0")
        if self.kind == "constant":
            return self.alpha0
        if self.kind == "linear_clamped":
            return max(self.alpha0 - self.rate * t, self.floor)
        return self.floor + (self.alpha0 - self.floor) * math.exp(-self.rate * t)

    def derivative(self, t: float) -> float:
        """Analytic d alpha/dt (never finite-differenced)."""
        if t < 0:
            raise ValueError(f"alpha schedule evaluated at t = {t} < 0")
        if self.kind == "constant":
            return 0.0
        if self.kind == "linear_clamped":
            return -self.rate if self.alpha0 - self.rate * t > self.floor else 0.0
        return -self.rate * (self.alpha0 - self.floor) * math.exp(-self.rate * t)


def alpha_eval(schedule: AlphaSchedule, t: float) -> float:
    return schedule.eval(t)


def _coeff_names(backend: str) -> tuple[str, ...]:
    return ("f_rad", "h") if backend == WARPED_CIRCLE_SPHERE else ("a", "b", "c")


def flow_rhs(state: CoupledState) -> tuple[dict[str, np.ndarray], list[np.ndarray]]:
    """Evolution rates of the squared metric coefficients and of phi.

    Metric rates match -2 Ric + 2 alpha grad phi (x) grad phi in the reduced
    frame; the coupling term lives only in the radial slot since phi depends
    on x alone.  Map components evolve by the Laplace-Beltrami operator
    (flat target, so the tension field is the componentwise Laplacian).
    """
    geom = state.geom
    rep = curvature(state)
    dphi_sq = np.zeros(geom.N)
    for p in state.phi:
        dphi_sq += d1(p.values, geom.dx) ** 2
    if geom.backend == WARPED_CIRCLE_SPHERE:
        f = geom.coeffs["f_rad"].values
        h = geom.coeffs["h"].values
        rates = {
            "f_rad": -2.0 * f**2 * rep.ric_radial.values + 2.0 * state.alpha * dphi_sq,
            "h": -2.0 * h**2 * rep.ric_fiber[0].values,
        }
    else:
        a = geom.coeffs["a"].values
        rates = {
            "a": -2.0 * a**2 * rep.ric_radial.values + 2.0 * state.alpha * dphi_sq,
            "b": -2.0 * geom.coeffs["b"].values ** 2 * rep.ric_fiber[0].values,
            "c": -2.0 * geom.coeffs["c"].values ** 2 * rep.ric_fiber[1].values,
        }
    phi_rates = [apply_laplacian(geom, p.values) for p in state.phi]
    return rates, phi_rates


@dataclass(frozen=True)
class FlowControls:
    dt0: float = 1e-3
    safety: float = 0.9
    rtol: float = 1e-9
    atol: float = 1e-11
    min_coeff_frac: float = 1e-4
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not (self.dt0 > 0 and self.safety > 0 and self.min_coeff_frac > 0):
            raise ValueError("flow controls must be positive")


@dataclass
class Trajectory:
    """Ordered checkpoints of a flow run plus step metadata."""

    checkpoints: list[CoupledState]
    schedule: AlphaSchedule
    dt_final: float
    n_steps: int
    n_rejections: int
    terminated_early: bool = False
    termination_reason: str | None = None

    def __post_init__(self):
        times = self.times()
        if np.any(np.diff(times) <= 0):
            raise ValueError("checkpoint times must be strictly increasing")

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.checkpoints])

    @property
    def t0(self) -> float:
        return self.checkpoints[0].t

    @property
    def t_end(self) -> float:
        return self.checkpoints[-1].t

    @property
    def geom0(self) -> ReducedGeometry:
        return self.checkpoints[0].geom

    def state_at(self, t: float) -> CoupledState:
        """Interpolated state: linear in time in the squared coefficients and in phi."""
        times = self.times()
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ValueError(f"t = {t} outside trajectory span [{times[0]}, {times[-1]}]")
        t = min(max(t, times[0]), times[-1])
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(max(j, 0), len(times) - 2)
        s0, s1 = self.checkpoints[j], self.checkpoints[j + 1]
        w = (t - s0.t) / (s1.t - s0.t)
        coeffs = {}
        for name in s0.geom.coeffs:
            sq = (1 - w) * s0.geom.coeffs[name].values ** 2 + w * s1.geom.coeffs[name].values ** 2
            coeffs[name] = GridField(np.sqrt(sq), s0.geom.L)
        geom = ReducedGeometry(
            backend=s0.geom.backend, n=s0.geom.n, coeffs=coeffs, fiber_periods=s0.geom.fiber_periods
        )
        phi = tuple(
            GridField((1 - w) * p0.values + w * p1.values, s0.geom.L)
            for p0, p1 in zip(s0.phi, s1.phi)
        )
        return CoupledState(geom=geom, phi=phi, t=t, alpha=self.schedule.eval(t))


def _pack(state: CoupledState) -> np.ndarray:
    parts = [state.geom.coeffs[name].values ** 2 for name in _coeff_names(state.geom.backend)]
    parts += [p.values for p in state.phi]
    return np.concatenate(parts)


def _unpack(y: np.ndarray, template: CoupledState, t: float, alpha: float) -> CoupledState:
    geom = template.geom
    names = _coeff_names(geom.backend)
    N = geom.N
    coeffs = {}
    for k, name in enumerate(names):
        sq = y[k * N : (k + 1) * N]
        coeffs[name] = GridField(np.sqrt(np.maximum(sq, 0.0)), geom.L)
    phi = []
    off = len(names) * N
    for m in range(len(template.phi)):
        phi.append(GridField(y[off + m * N : off + (m + 1) * N], geom.L))
    new_geom = ReducedGeometry(
        backend=geom.backend, n=geom.n, coeffs=coeffs, fiber_periods=geom.fiber_periods
    )
    return CoupledState(geom=new_geom, phi=tuple(phi), t=t, alpha=alpha)


def _rhs_vec(y: np.ndarray, t: float, template: CoupledState, schedule: AlphaSchedule) -> np.ndarray:
    state = _unpack(y, template, t, schedule.eval(max(t, 0.0)))
    rates, phi_rates = flow_rhs(state)
    parts = [rates[name] for name in _coeff_names(state.geom.backend)]
    parts += phi_rates
    return np.concatenate(parts)


def _rk4_step(y, t, dt, template, schedule):
    k1 = _rhs_vec(y, t, template, schedule)
    k2 = _rhs_vec(y + 0.5 * dt * k1, t + 0.5 * dt, template, schedule)
    k3 = _rhs_vec(y + 0.5 * dt * k2, t + 0.5 * dt, template, schedule)
    k4 = _rhs_vec(y + dt * k3, t + dt, template, schedule)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def run(
    initial: CoupledState,
    schedule: AlphaSchedule,
    t_end: float,
    controls: FlowControls = FlowControls(),
    n_checkpoints: int = 64,
) -> Trajectory:
    """Integrate the flow from ``initial`` to ``t_end`` with adaptive RK4.

    Checkpoints are stored at ``n_checkpoints + 1`` evenly spaced times.
    The run terminates early (flagged Trajectory) if any squared metric
    coefficient falls below (min_coeff_frac * initial minimum)^2.
    """
    if not t_end > initial.t:
        raise ValueError("t_end must exceed the initial time")
    geom = initial.geom
    names = _coeff_names(geom.backend)
    init_min = min(float(np.min(geom.coeffs[name].values)) for name in names)
    floor_sq = (controls.min_coeff_frac * init_min) ** 2
    if init_min <= 0:
        raise BlowUpError("initial metric degenerate")

    # parabolic CFL cap for the explicit stages
    dt_cap = 0.25 * geom.dx**2 / float(np.max(geom.gxx()))
    dt = min(controls.dt0, dt_cap)

    ckpt_times = np.linspace(initial.t, t_end, n_checkpoints + 1)
    y = _pack(initial)
    t = initial.t
    state = CoupledState(geom=geom, phi=initial.phi, t=t, alpha=schedule.eval(t))
    checkpoints = [state]
    next_ck = 1
    n_steps = 0
    n_rej = 0
    terminated = False
    reason = None

    while t < t_end - 1e-14 and next_ck <= n_checkpoints:
        target = ckpt_times[next_ck]
        dt_try = min(dt, dt_cap, target - t)
        try:
            y_big = _rk4_step(y, t, dt_try, state, schedule)
            y_h = _rk4_step(y, t, 0.5 * dt_try, state, schedule)
            y_half2 = _rk4_step(y_h, t + 0.5 * dt_try, 0.5 * dt_try, state, schedule)
        except GeometryError:
            # a trial stage left the admissible metric cone: the coefficient
            # is collapsing faster than the step can resolve
            terminated = True
            reason = f"metric degenerated during step at t = {t:.6g}"
            break
        if not np.all(np.isfinite(y_half2)):
            raise IntegrationFailureError(
                f"NaN during step at t = {t:.6g}", last_state=checkpoints[-1]
            )
        scale = controls.atol + controls.rtol * np.abs(y_half2)
        err = float(np.max(np.abs(y_big - y_half2) / scale)) / 15.0
        if err <= 1.0:
            t += dt_try
            y = y_half2
            n_steps += 1
            ncoef = len(names) * geom.N
            if np.min(y[:ncoef]) < floor_sq:
                terminated = True
                reason = f"metric coefficient fell below floor at t = {t:.6g}"
                # clamp at the floor so the terminal state stays representable
                y[:ncoef] = np.maximum(y[:ncoef], floor_sq)
                state = _unpack(y, state, t, schedule.eval(t))
                checkpoints.append(state)
                break
            if abs(t - target) < 1e-13:
                state = _unpack(y, state, t, schedule.eval(t))
                checkpoints.append(state)
                next_ck += 1
        else:
            n_rej += 1
        factor = controls.safety * err ** (-0.2) if err > 0 else 5.0
        dt = dt_try * min(5.0, max(0.2, factor))
        if n_steps + n_rej > controls.max_steps:
            raise IntegrationFailureError("step budget exhausted", last_state=checkpoints[-1])

    return Trajectory(
        checkpoints=checkpoints,
        schedule=schedule,
        dt_final=dt,
        n_steps=n_steps,
        n_rejections=n_rej,
        terminated_early=terminated,
        termination_reason=reason,
    )


# ---------------------------------------------------------------------------
# checkpoint persistence


def state_to_doc(state: CoupledState) -> dict:
    geom = state.geom
    doc = {
        "backend": geom.backend,
        "n": geom.n,
        "N": geom.N,
        "L": geom.L,
        "t": state.t,
        "alpha": state.alpha,
        "coefficients": {name: c.values.tolist() for name, c in geom.coeffs.items()},
        "phi": [p.values.tolist() for p in state.phi],
    }
    if geom.backend == DIAGONAL_TORUS:
        doc["fiber_periods"] = list(geom.fiber_periods)
    return doc


def doc_to_state(doc: dict) -> CoupledState:
    L = float(doc["L"])
    coeffs = {name: GridField(np.array(vals), L) for name, vals in doc["coefficients"].items()}
    geom = ReducedGeometry(
        backend=doc["backend"],
        n=int(doc["n"]),
        coeffs=coeffs,
        fiber_periods=tuple(doc["fiber_periods"]) if "fiber_periods" in doc else None,
    )
    phi = tuple(GridField(np.array(vals), L) for vals in doc["phi"])
    return CoupledState(geom=geom, phi=phi, t=float(doc["t"]), alpha=float(doc["alpha"]))


def save_checkpoints(traj: Trajectory, path) -> None:
    with open(path, "w") as fh:
        json.dump([state_to_doc(s) for s in traj.checkpoints], fh)


def load_checkpoints(path, schedule: AlphaSchedule) -> Trajectory:
    with open(path) as fh:
        docs = json.load(fh)
    return Trajectory(
        checkpoints=[doc_to_state(d) for d in docs],
        schedule=schedule,
        dt_final=float("nan"),
        n_steps=0,
        n_rejections=0,
    )
