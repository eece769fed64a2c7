"""End-to-end acceptance battery.

Each test prints one pass/fail line for its criterion; tolerances are pinned
here and not read from configuration.
"""

import math
import time

import numpy as np

from hrflab import entropy as entropy_mod
from hrflab import harness
from hrflab import heat as heat_mod
from hrflab import moser as moser_mod
from hrflab import spectral as spectral_mod
from hrflab.geometry import GridField, build_geometry, CoupledState, curvature

import conftest


def _report(label, ok, detail=""):
    print(f"[{label}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{label}: {detail}"


def test_criterion_01_shrinking_cylinder_exactness(preset_runs):
    _, traj = preset_runs["shrinking-cylinder"]
    h0 = 2.0
    worst = 0.0
    for st in traj.checkpoints:
        h2 = st.geom.coeffs["h"].values ** 2
        worst = max(worst, float(np.max(np.abs(h2 - (h0**2 - 2.0 * st.t)))))
    _report("criterion 1: shrinking-cylinder exactness",
            worst <= 1e-6 * h0**2, f"max |h^2 - (4 - 2t)| = {worst:.3e}")


def test_criterion_02_conjugate_mass_conservation(entropy_records):
    worst = 0.0
    for name in ("shrinking-cylinder", "list-flow-sine"):
        for r in entropy_records[name]:
            worst = max(worst, abs(r.mass - 1.0))
    _report("criterion 2: conjugate-heat mass conservation",
            worst <= 1e-6, f"max |mass - 1| = {worst:.3e}")


def test_criterion_03_entropy_monotonicity(entropy_records):
    ok = True
    detail = []
    for name, records in entropy_records.items():
        ws = np.array([r.W for r in records])
        min_step = float(np.min(np.diff(ws)))
        worst_gap = 0.0
        match = True
        for r in records[1:-1]:
            gap = abs(r.dW_fd - r.dW_rhs)
            tol = max(1e-4, 0.02 * abs(r.dW_rhs))
            worst_gap = max(worst_gap, gap)
            match = match and gap <= tol
        ok = ok and min_step >= -1e-6 and match
        detail.append(f"{name}: min step {min_step:.2e}, worst gap {worst_gap:.2e}")
    _report("criterion 3: entropy monotonicity and derivative match",
            ok, "; ".join(detail))


def test_criterion_04_lambda0_monotone_and_closed_form(entropy_records, preset_runs):
    ok = True
    for records in entropy_records.values():
        lam = np.array([r.lambda0 for r in records])
        ok = ok and float(np.min(np.diff(lam))) >= -1e-6
    _, traj = preset_runs["shrinking-cylinder"]
    worst_rel = 0.0
    for r in entropy_records["shrinking-cylinder"]:
        exact = 2.0 / (4.0 - 2.0 * r.t)
        worst_rel = max(worst_rel, abs(r.lambda0 - exact) / exact)
    _report("criterion 4: lambda0 monotone, cylinder closed form",
            ok and worst_rel <= 1e-4, f"worst relative error {worst_rel:.3e}")


def test_criterion_05_sobolev_suite(preset_runs, constants_contexts, tmp_path):
    ok = True
    detail = []
    for name, (scn, traj) in preset_runs.items():
        res = harness.sobolev_suite(traj, scn, str(tmp_path), constants_contexts[name])
        ok = ok and res["violations"] == 0 and res["minimizer_min_quotient"] >= 1.0 - 1e-9
        detail.append(f"{name}: {res['violations']} violations, "
                      f"minimizer quotient {res['minimizer_min_quotient']:.4f}")
    _report("criterion 5: evolving Sobolev inequality", ok, "; ".join(detail))


def test_criterion_06_log_sobolev_suite(preset_runs, constants_contexts):
    eps_grid = (0.05, 0.1, 0.2, 0.5, 1.0)
    worst = math.inf
    for name, (scn, traj) in preset_runs.items():
        ctx = constants_contexts[name]
        geom0 = traj.geom0
        bumps = spectral_mod.bump_family(geom0.N, geom0.L, 10, scn["seed"], counter=3)
        times = traj.times()
        for idx in (0, len(times) // 2, len(times) - 1):
            t = float(times[idx])
            state = traj.state_at(t)
            w = state.geom.node_weights()
            for eps in eps_grid:
                for b in bumps:
                    norm = math.sqrt(float(np.sum(w * b.values**2)))
                    unit = GridField(b.values / norm, b.L)
                    res = spectral_mod.log_sobolev_residual(
                        state, unit, eps, ctx.A0, ctx.B0, t - traj.t0
                    )
                    worst = min(worst, res)
    _report("criterion 6: log-Sobolev residuals",
            worst >= -1e-8, f"min residual = {worst:.3e}")


def test_criterion_07_truncation_claim(preset_runs, constants_contexts):
    scn, traj = preset_runs["flat-torus-static"]
    ctx = constants_contexts["flat-torus-static"]
    state0 = traj.checkpoints[0]
    geom0 = traj.geom0
    fields = spectral_mod.trig_family(geom0.N, geom0.L, 100, scn["seed"], counter=4)
    ok = True
    worst_slack = math.inf
    for f in fields:
        rep = spectral_mod.truncation_claim_check(
            state0, GridField(np.abs(f.values), f.L), ctx.A0, ctx.B0
        )
        slack = rep.rhs + 50.0 * geom0.dx - rep.lhs_sum
        worst_slack = min(worst_slack, slack)
        ok = ok and slack >= 0.0

    # gradient-partition identity residual decays at first order in dx
    residuals = []
    for N in (128, 256):
        geom = build_geometry("diagonal_torus", 3, N, 2 * math.pi,
                              {"a": 1.0, "b": 1.0, "c": 1.0})
        x = geom.x()
        st = CoupledState(geom=geom, phi=(GridField(np.zeros(N), geom.L),))
        field = GridField(np.abs(np.sin(x) + 0.5 * np.cos(2 * x)) + 0.1, geom.L)
        rep = spectral_mod.truncation_claim_check(st, field, ctx.A0, ctx.B0)
        residuals.append(rep.grad_identity_residual)
    rate_ok = residuals[1] <= 0.75 * residuals[0] + 1e-14
    _report("criterion 7: truncation claim",
            ok and rate_ok,
            f"min slack {worst_slack:.3e}; identity residuals {residuals[0]:.3e} "
            f"-> {residuals[1]:.3e}")


def test_criterion_08_moser_sup_bound(preset_runs, constants_contexts):
    ok = True
    detail = []
    for name in conftest.NONNEGATIVE_S:
        scn, traj = preset_runs[name]
        ctx = constants_contexts[name]
        geom0 = traj.geom0
        x = geom0.x()
        u0 = GridField(1.0 + np.cos(2.0 * np.pi * x / geom0.L) ** 2, geom0.L)
        series = heat_mod.heat_forward(traj, u0, traj.t0, traj.t_end)
        A_T, _ = ctx.predicted(traj.t_end - traj.t0)
        constants = moser_mod.moser_constants(geom0.n, 2.0, A_T)
        for p in (0.5, 1.0, 2.0, 4.0):
            rep = moser_mod.sup_bound_check(traj, series, 0.0, p, constants, 0.0)
            ok = ok and rep.all_pass
            detail.append(f"{name} p={p:g}: ratio {rep.max_ratio:.2e}")
    ident = abs(moser_mod.moser_constants(3).exponent_sum() - 5.0 / 4.0)
    _report("criterion 8: parabolic sup bound",
            ok and ident <= 1e-12, "; ".join(detail))


def test_criterion_09_heat_kernel_bound(preset_runs, constants_contexts):
    ok = True
    detail = []
    for name, (scn, traj) in preset_runs.items():
        ctx = constants_contexts[name]
        geom0 = traj.geom0
        est = heat_mod.heat_kernel(traj, geom0.N // 2, traj.t0, scn["kernel.sigma_w"])
        A_T, _ = ctx.predicted(traj.t_end - traj.t0)
        constants = moser_mod.moser_constants(geom0.n, 2.0, A_T)
        rep = heat_mod.kernel_bound_check(est, traj, constants, ctx.S0)
        if ctx.S0 == 0.0:
            mass_ok = bool(np.all(est.masses <= 1.0 + 1e-6))
        else:
            mass_ok = bool(np.all(
                est.masses <= np.exp(ctx.S0 * (est.times - traj.t0)) + 1e-6
            ))
        ok = ok and rep.all_pass and mass_ok
        detail.append(f"{name}: ratio {rep.max_ratio:.2e}, mass ok {mass_ok}")
    _report("criterion 9: heat-kernel upper bound", ok, "; ".join(detail))


def test_criterion_10_static_oracle_and_runtime(preset_runs):
    _, traj = preset_runs["flat-torus-static"]
    geom0 = traj.geom0
    x = geom0.x()
    # lowest nonconstant mode: the oracle uses continuum eigenvalues, so the
    # comparison budget is the O(dx^2) dispersion of the discrete operator
    u0 = GridField(1.0 + np.sin(2.0 * np.pi * x / geom0.L), geom0.L)
    series = heat_mod.heat_forward(traj, u0, traj.t0, traj.t_end)
    worst = 0.0
    for t, f in zip(series.times, series.fields):
        if 0.01 <= t - traj.t0 <= 1.0:
            ref = heat_mod.heat_spectral_reference(traj, u0, traj.t0, float(t))
            worst = max(worst, float(np.max(np.abs(f.values - ref.values))))
    elapsed = time.time() - conftest.SESSION_START
    _report("criterion 10: static spectral oracle and runtime",
            worst <= 1e-4 and elapsed <= 300.0,
            f"sup error {worst:.3e}, battery time {elapsed:.1f} s")
