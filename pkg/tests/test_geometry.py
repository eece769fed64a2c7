import math

import numpy as np
import pytest

from hrflab.geometry import (
    DIAGONAL_TORUS,
    WARPED_CIRCLE_SPHERE,
    CoupledState,
    DegenerateMetricError,
    GeometryError,
    GridField,
    GridMismatchError,
    UnsupportedDimensionError,
    apply_laplacian,
    build_geometry,
    curvature,
    frame_norm_sq,
    grad_norm_sq,
    hessian_radial,
    integrate,
    laplace_beltrami,
    laplace_matrix,
    phi_gradient_sq,
    sphere_volume,
)

TWO_PI = 2.0 * math.pi


def flat_torus(N=64, L=TWO_PI):
    geom = build_geometry(DIAGONAL_TORUS, 3, N, L, {"a": 1.0, "b": 1.0, "c": 1.0})
    return CoupledState(geom=geom, phi=(GridField(np.zeros(N), L),))


def cylinder(N=64, h0=2.0):
    geom = build_geometry(WARPED_CIRCLE_SPHERE, 3, N, TWO_PI, {"f_rad": 1.0, "h": h0})
    return CoupledState(geom=geom, phi=(GridField(np.zeros(N), TWO_PI),))


def warped(N, amp=0.3):
    geom = build_geometry(
        WARPED_CIRCLE_SPHERE, 3, N, TWO_PI,
        {"f_rad": 1.0, "h": lambda x: 2.0 + amp * np.sin(x)},
    )
    return CoupledState(geom=geom, phi=(GridField(np.zeros(N), TWO_PI),))


def test_flat_torus_curvature_vanishes():
    rep = curvature(flat_torus())
    assert np.max(np.abs(rep.R.values)) == 0.0
    assert np.max(np.abs(rep.S.values)) == 0.0


def test_flat_torus_volume_exact():
    st = flat_torus()
    assert st.geom.volume() == pytest.approx(TWO_PI**3, rel=1e-14)


def test_cylinder_scalar_curvature_closed_form():
    st = cylinder(h0=2.0)
    rep = curvature(st)
    assert np.max(np.abs(rep.R.values - 0.5)) < 1e-12
    assert st.geom.volume() == pytest.approx(TWO_PI * sphere_volume(2) * 4.0, rel=1e-14)


def test_sphere_fiber_volume():
    assert sphere_volume(2) == pytest.approx(4.0 * math.pi, rel=1e-15)
    assert sphere_volume(3) == pytest.approx(2.0 * math.pi**2, rel=1e-15)


def warped_curvature_oracle(N, amp=0.3):
    """Curvature of f = 1, h = 2 + amp sin x from exact derivatives of h."""
    x = np.arange(N) * (TWO_PI / N)
    h = 2.0 + amp * np.sin(x)
    hp = amp * np.cos(x)
    hpp = -amp * np.sin(x)
    ric_rad = -2.0 * hpp / h
    ric_fib = -hpp / h - (hp**2 - 1.0) / h**2
    return ric_rad + 2.0 * ric_fib


def test_warped_curvature_second_order_convergence():
    errs = []
    for N in (64, 128, 256):
        rep = curvature(warped(N))
        errs.append(float(np.max(np.abs(rep.R.values - warped_curvature_oracle(N)))))
    assert errs[1] < 0.3 * errs[0]
    assert errs[2] < 0.3 * errs[1]


def test_scalar_curvature_is_trace_of_ricci():
    st = warped(64)
    rep = curvature(st)
    trace = rep.ric_radial.values.copy()
    for mult, rf in zip(rep.fiber_multiplicities, rep.ric_fiber):
        trace += mult * rf.values
    assert np.max(np.abs(rep.R.values - trace)) < 1e-12


def test_coupled_curvature_subtracts_map_gradient():
    N = 64
    st0 = flat_torus(N)
    x = st0.geom.x()
    phi = (GridField(0.3 * np.sin(x), TWO_PI),)
    st = CoupledState(geom=st0.geom, phi=phi, alpha=1.5)
    rep = curvature(st)
    expected = -1.5 * phi_gradient_sq(st)
    assert np.max(np.abs(rep.S.values - expected)) < 1e-12


def test_laplacian_self_adjoint_and_negative():
    for st in (flat_torus(48), warped(48)):
        geom = st.geom
        w = geom.node_weights()
        rng = np.random.Generator(np.random.Philox(key=7))
        u = rng.standard_normal(geom.N)
        v = rng.standard_normal(geom.N)
        lu = apply_laplacian(geom, u)
        lv = apply_laplacian(geom, v)
        assert abs(np.sum(w * lu * v) - np.sum(w * u * lv)) < 1e-10
        assert np.sum(w * lu * u) <= 1e-12


def test_laplace_matrix_matches_operator():
    st = warped(32)
    M = laplace_matrix(st.geom)
    rng = np.random.Generator(np.random.Philox(key=8))
    u = rng.standard_normal(32)
    assert np.max(np.abs(M @ u - apply_laplacian(st.geom, u))) < 1e-12


def test_laplacian_eigenfunction_convergence():
    errs = []
    for N in (64, 128):
        st = flat_torus(N)
        x = st.geom.x()
        u = np.sin(x)
        lap = apply_laplacian(st.geom, u)
        errs.append(float(np.max(np.abs(lap + u))))
    assert errs[0] < 2e-3
    assert errs[1] < 0.3 * errs[0]


def test_hessian_trace_is_laplacian():
    st = warped(128)
    x = st.geom.x()
    u = st.grid_field(np.cos(x) + 0.2 * np.sin(2 * x))
    hr, hf = hessian_radial(st, u)
    trace = hr.values.copy()
    for mult, h in zip(st.geom.fiber_multiplicities(), hf):
        trace += mult * h.values
    lap = laplace_beltrami(st, u).values
    # both are second-order discretizations; they agree to O(dx^2)
    assert np.max(np.abs(trace - lap)) < 5e-3


def test_hessian_of_constant_vanishes():
    st = warped(64)
    hr, hf = hessian_radial(st, st.grid_field(np.full(64, 3.0)))
    assert np.max(np.abs(hr.values)) < 1e-12
    assert all(np.max(np.abs(h.values)) < 1e-12 for h in hf)


def test_integrate_and_grad_norm():
    st = flat_torus(64)
    x = st.geom.x()
    one = st.grid_field(np.ones(64))
    assert integrate(st, one) == pytest.approx(st.geom.volume(), rel=1e-14)
    g = grad_norm_sq(st, st.grid_field(np.sin(x)))
    assert np.max(np.abs(g.values - np.cos(x) ** 2)) < 5e-3


def test_frame_norm_multiplicities():
    st = cylinder(32)
    rad = np.full(32, 2.0)
    fib = (np.full(32, 3.0),)
    out = frame_norm_sq(st.geom, rad, fib)
    assert np.max(np.abs(out - (4.0 + 2 * 9.0))) < 1e-12


def test_validation_errors():
    with pytest.raises(GeometryError):
        build_geometry(DIAGONAL_TORUS, 3, 4, TWO_PI, {"a": 1.0, "b": 1.0, "c": 1.0})
    with pytest.raises(UnsupportedDimensionError):
        build_geometry(WARPED_CIRCLE_SPHERE, 2, 32, TWO_PI, {"f_rad": 1.0, "h": 1.0})
    with pytest.raises(DegenerateMetricError):
        build_geometry(DIAGONAL_TORUS, 3, 32, TWO_PI, {"a": 0.0, "b": 1.0, "c": 1.0})
    with pytest.raises(GeometryError):
        build_geometry("unknown", 3, 32, TWO_PI, {})
    st = flat_torus(32)
    with pytest.raises(GridMismatchError):
        laplace_beltrami(st, GridField(np.zeros(64), TWO_PI))


def test_grid_field_validation():
    with pytest.raises(ValueError):
        GridField(np.array([1.0, np.nan] + [0.0] * 30), TWO_PI)
    f = GridField(np.zeros(16), 1.0)
    assert f.N == 16
    assert f.dx == pytest.approx(1.0 / 16)
