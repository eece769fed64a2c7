import math

import numpy as np
import pytest

from hrflab.flow import AlphaSchedule, run
from hrflab.geometry import (
    DIAGONAL_TORUS,
    WARPED_CIRCLE_SPHERE,
    CoupledState,
    GridField,
    build_geometry,
)
from hrflab.heat import (
    HeatError,
    conjugate_backward,
    heat_forward,
    heat_kernel,
    heat_spectral_reference,
    kernel_bound_check,
    kernel_spectral_reference,
    periodic_gaussian,
)
from hrflab.moser import moser_constants

TWO_PI = 2.0 * math.pi


def flat_traj(N=64, t_end=1.0):
    geom = build_geometry(DIAGONAL_TORUS, 3, N, TWO_PI, {"a": 1.0, "b": 1.0, "c": 1.0})
    st = CoupledState(geom=geom, phi=(GridField(np.zeros(N), TWO_PI),))
    return run(st, AlphaSchedule(), t_end, n_checkpoints=32)


def cylinder_traj(N=64, t_end=1.0, phi_amp=0.0):
    geom = build_geometry(WARPED_CIRCLE_SPHERE, 3, N, TWO_PI, {"f_rad": 1.0, "h": 2.0})
    x = geom.x()
    st = CoupledState(geom=geom, phi=(GridField(phi_amp * np.sin(x), TWO_PI),))
    return run(st, AlphaSchedule(), t_end, n_checkpoints=32)


def test_flat_mode_decay():
    traj = flat_traj()
    x = traj.geom0.x()
    u0 = GridField(np.sin(x), TWO_PI)
    series = heat_forward(traj, u0, 0.0, 1.0)
    # discrete eigenvalue of the mode, so only time-integration error remains
    geom = traj.geom0
    lam = (2.0 - 2.0 * math.cos(geom.dx)) / geom.dx**2
    for t, f in zip(series.times, series.fields):
        exact = math.exp(-lam * float(t)) * np.sin(x)
        assert np.max(np.abs(f.values - exact)) < 1e-6


def test_maximum_principle_on_evolving_metric():
    traj = cylinder_traj(phi_amp=0.5)
    x = traj.geom0.x()
    u0 = GridField(2.0 + np.sin(3 * x), TWO_PI)
    series = heat_forward(traj, u0, 0.0, 1.0)
    lo, hi = float(np.min(u0.values)), float(np.max(u0.values))
    for f in series.fields:
        assert np.min(f.values) >= lo - 1e-9
        assert np.max(f.values) <= hi + 1e-9


def test_conjugate_mass_conserved():
    traj = cylinder_traj(phi_amp=0.5)
    geom = traj.geom0
    bump = periodic_gaussian(geom.N, geom.L, geom.L / 2, geom.L / 8)
    state1 = traj.state_at(1.0)
    bump /= float(np.sum(state1.geom.node_weights() * bump))
    series = conjugate_backward(traj, GridField(bump, geom.L), 1.0, 0.0)
    for t, f in zip(series.times, series.fields):
        mass = float(np.sum(traj.state_at(float(t)).geom.node_weights() * f.values))
        assert abs(mass - 1.0) < 1e-5


def test_spectral_reference_matches_forward_solution():
    traj = flat_traj()
    x = traj.geom0.x()
    u0 = GridField(1.0 + np.sin(x), TWO_PI)
    series = heat_forward(traj, u0, 0.0, 1.0)
    worst = 0.0
    for t, f in zip(series.times, series.fields):
        if 0.01 <= t <= 1.0:
            ref = heat_spectral_reference(traj, u0, 0.0, float(t))
            worst = max(worst, float(np.max(np.abs(f.values - ref.values))))
    assert worst < 5e-4  # N = 64 here; tightens fourfold at N = 128


def test_spectral_reference_rejects_moving_metric():
    traj = cylinder_traj()
    u0 = GridField(np.ones(traj.geom0.N), TWO_PI)
    with pytest.raises(HeatError):
        heat_spectral_reference(traj, u0, 0.0, 0.5)


def test_kernel_mass_and_resolution():
    traj = flat_traj()
    est = heat_kernel(traj, traj.geom0.N // 2, 0.0, 0.25)
    assert abs(est.masses[0] - 1.0) < 1e-12
    assert np.all(np.diff(est.masses) <= 1e-12)
    assert not est.resolved(0.5)
    assert est.resolved(0.7)


def test_kernel_matches_spectral_delta_oracle():
    traj = flat_traj(N=128)
    y = traj.geom0.N // 2
    errs = []
    for sigma in (0.2, 0.1):
        est = heat_kernel(traj, y, 0.0, sigma)
        worst = 0.0
        for t, f in zip(est.times, est.fields):
            if float(t) >= 0.5:
                ref = kernel_spectral_reference(traj, y, 0.0, float(t))
                worst = max(worst, float(np.max(np.abs(f.values - ref.values))))
        errs.append(worst)
    # mollification bias shrinks with sigma_w
    assert errs[1] < errs[0]
    assert errs[1] < 1e-3


def test_kernel_mollifier_width_validation():
    traj = flat_traj(N=32)
    with pytest.raises(HeatError):
        heat_kernel(traj, 0, 0.0, 1e-4)


def test_kernel_bound_check_flat():
    traj = flat_traj()
    est = heat_kernel(traj, traj.geom0.N // 2, 0.0, 0.25)
    rep = kernel_bound_check(est, traj, moser_constants(3, 2.0, 10.0), 0.0)
    assert rep.all_pass
    assert rep.max_ratio <= 1.0
    assert rep.n_excluded > 0  # early times below the resolution cutoff


def test_periodic_gaussian_wraps():
    g = periodic_gaussian(64, TWO_PI, 0.0, 0.5)
    assert g[0] == pytest.approx(np.max(g))
    assert g[1] == pytest.approx(g[-1], rel=1e-12)
