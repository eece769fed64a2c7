import math

import numpy as np
import pytest

from hrflab.flow import AlphaSchedule, run
from hrflab.geometry import DIAGONAL_TORUS, CoupledState, GridField, build_geometry
from hrflab.heat import FieldSeries, heat_forward
from hrflab.moser import (
    MoserError,
    export_sup_bound_csv,
    moser_constants,
    sup_bound_check,
)

TWO_PI = 2.0 * math.pi


def test_exponent_sum_against_partial_series():
    for n in (3, 4, 5):
        for p0 in (2.0, 3.0):
            mc = moser_constants(n, p0, 1.0)
            chi = 1.0 + 2.0 / n
            partial = sum(1.0 / (p0 * chi**k) for k in range(200))
            assert abs(mc.exponent_sum() - partial) < 1e-12
            assert abs(mc.exponent_sum() - (n + 2.0) / (2.0 * p0)) < 1e-15


def test_dominance_identity_on_log_grid():
    mc = moser_constants(3, 2.0, 0.7)
    n, p0 = 3, 2.0
    expo = (n + 2.0) / (2.0 * p0)
    for a in np.logspace(-3, 3, 7):
        for dt in np.logspace(-3, 2, 6):
            lhs = mc.C0 * (a * p0 + (n + 2.0) / (2.0 * dt)) ** expo
            rhs = (mc.C1 * a + mc.C2 / dt) ** expo
            assert lhs == pytest.approx(rhs, rel=1e-12)


def test_constants_monotone_in_A():
    small = moser_constants(3, 2.0, 1.0)
    big = moser_constants(3, 2.0, 10.0)
    assert big.C0 > small.C0
    assert big.C1 > small.C1
    assert big.C2 > small.C2


def test_constants_for_small_p_finite_positive():
    mc = moser_constants(3)
    for p in (0.25, 0.5, 1.0, 1.5):
        c1, c2, c0n = mc.constants_for_p(p)
        assert c1 > 0 and c2 > 0 and c0n > 0
        assert math.isfinite(c1) and math.isfinite(c2)
    # p >= 2 path reproduces the direct construction
    c1, c2, c0n = mc.constants_for_p(4.0)
    direct = moser_constants(3, 4.0, mc.A)
    assert c1 == pytest.approx(direct.C1, rel=1e-14)
    assert c2 == pytest.approx(direct.C2, rel=1e-14)
    assert c0n == pytest.approx(direct.C1 / 4.0, rel=1e-14)


def test_validation():
    with pytest.raises(MoserError):
        moser_constants(2)
    with pytest.raises(MoserError):
        moser_constants(3, 1.0)
    with pytest.raises(MoserError):
        moser_constants(3, 2.0, 0.0)
    with pytest.raises(MoserError):
        moser_constants(3).constants_for_p(0.0)


def flat_traj(N=64):
    geom = build_geometry(DIAGONAL_TORUS, 3, N, TWO_PI, {"a": 1.0, "b": 1.0, "c": 1.0})
    st = CoupledState(geom=geom, phi=(GridField(np.zeros(N), TWO_PI),))
    return run(st, AlphaSchedule(), 1.0, n_checkpoints=16)


def test_sup_bound_on_heat_solution(tmp_path):
    traj = flat_traj()
    x = traj.geom0.x()
    u0 = GridField(1.0 + 0.8 * np.sin(x) ** 2, TWO_PI)
    series = heat_forward(traj, u0, 0.0, 1.0)
    mc = moser_constants(3, 2.0, 5.0)
    for p in (0.5, 1.0, 2.0, 4.0):
        rep = sup_bound_check(traj, series, 0.0, p, mc, 0.0)
        assert rep.all_pass
        assert rep.max_ratio <= 1.0
        assert rep.spacetime_integral > 0
    rep = sup_bound_check(traj, series, 0.0, 1.0, mc, 0.0)
    path = tmp_path / "sup.csv"
    export_sup_bound_csv(rep, path)
    header = path.read_text().splitlines()[0]
    assert header == "t,sup_f,bound,ratio,pass"


def test_sup_bound_rejects_negative_fields():
    traj = flat_traj()
    times = traj.times()
    bad = FieldSeries(times, tuple(
        GridField(np.full(64, -1.0), TWO_PI) for _ in times
    ))
    with pytest.raises(MoserError):
        sup_bound_check(traj, bad, 0.0, 2.0, moser_constants(3), 0.0)
    good = FieldSeries(times, tuple(
        GridField(np.ones(64), TWO_PI) for _ in times
    ))
    with pytest.raises(MoserError):
        sup_bound_check(traj, good, -1.0, 2.0, moser_constants(3), 0.0)
