"""Scenario configuration, suite orchestration, and report emission.

A scenario is described by a flat key = value text file with dotted section
prefixes (``geometry.``, ``phi.``, ``alpha.``, ``run.``, ``verify.``, and
per-suite sections).  Unknown keys are rejected with the offending line
number.  ``run_scenario`` executes the flow, then every enabled
verification suite, and writes ``report.json``, per-suite CSV files, flow
checkpoints, and rendered figures into the output directory.

All randomness derives from the single scenario seed through a counter-based
generator, so identical scenario + seed produce byte-identical reports.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import entropy as entropy_mod
from . import heat as heat_mod
from . import moser as moser_mod
from . import spectral as spectral_mod
from .flow import (
    AlphaSchedule,
    BlowUpError,
    FlowControls,
    FlowError,
    Trajectory,
    run,
    save_checkpoints,
)
from .geometry import (
    DIAGONAL_TORUS,
    WARPED_CIRCLE_SPHERE,
    CoupledState,
    GridField,
    build_geometry,
    curvature,
)

OUTPUT_DIR_ENV = "HRFLAB_OUT_DIR"

SUITE_NAMES = ("entropy", "spectral", "sobolev", "kernel", "moser")


class ConfigError(ValueError):
    pass


# every accepted key with (type, default); None default means required or
# conditionally required (validated in scenario_from_config)
_KEY_SPEC = {
    "seed": (int, 0),
    "geometry.backend": (str, None),
    "geometry.n": (int, 3),
    "geometry.grid_points": (int, 128),
    "geometry.length": (float, 2.0 * math.pi),
    "geometry.radial": (float, 1.0),
    "geometry.fiber": (float, None),
    "geometry.fiber_b": (float, None),
    "geometry.fiber_c": (float, None),
    "geometry.period_y": (float, 2.0 * math.pi),
    "geometry.period_z": (float, 2.0 * math.pi),
    "phi.components": (int, 1),
    "phi.amplitude": (str, "0"),
    "phi.wavenumber": (str, "1"),
    "phi.offset": (str, "0"),
    "alpha.kind": (str, "constant"),
    "alpha.alpha0": (float, 1.0),
    "alpha.rate": (float, 0.0),
    "alpha.floor": (float, 1e-6),
    "run.t_end": (float, 1.0),
    "run.dt0": (float, 1e-3),
    "run.checkpoints": (int, 128),
    "verify.entropy": (bool, True),
    "verify.spectral": (bool, True),
    "verify.sobolev": (bool, True),
    "verify.kernel": (bool, True),
    "verify.moser": (bool, True),
    "entropy.eps": (float, 0.3),
    "entropy.mono_tol": (float, 1e-6),
    "entropy.match_abs": (float, 1e-4),
    "entropy.match_rel": (float, 0.02),
    "entropy.mass_tol": (float, 1e-6),
    "spectral.step_tol": (float, 1e-6),
    "spectral.oracle_tol": (float, 1e-4),
    "sobolev.family_size": (int, 20),
    "sobolev.eps_grid": (str, "0.05,0.1,0.2,0.5,1"),
    "sobolev.bumps": (int, 10),
    "sobolev.sample_times": (int, 3),
    "sobolev.logsob_tol": (float, 1e-8),
    "sobolev.truncation_fields": (int, 10),
    "kernel.sigma_w": (float, 0.12),
    "kernel.source_node": (int, -1),
    "kernel.mass_tol": (float, 1e-6),
    "moser.p_values": (str, "0.5,1,2,4"),
    "moser.a": (float, 0.0),
}

_RANGES = {
    "geometry.n": (3, 16),
    "geometry.grid_points": (8, 4096),
    "geometry.length": (1e-6, 1e6),
    "run.checkpoints": (2, 100000),
    "phi.components": (0, 8),
    "sobolev.family_size": (1, 10000),
    "sobolev.bumps": (1, 10000),
    "sobolev.sample_times": (1, 10000),
    "sobolev.truncation_fields": (0, 10000),
}


def _coerce(key: str, raw: str):
    typ, _ = _KEY_SPEC[key]
    if typ is bool:
        low = raw.lower()
        if low in ("on", "true", "1", "yes"):
            return True
        if low in ("off", "false", "0", "no"):
            return False
        raise ConfigError(f"key {key}: expected on/off, got {raw!r}")
    try:
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key}: {exc}") from exc


def parse_config(path) -> dict:
    """Read a flat key = value file; '#' comments; unknown keys rejected."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {text!r}")
            key, raw = (part.strip() for part in text.split("=", 1))
            if key not in _KEY_SPEC:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                values[key] = _coerce(key, raw)
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return values


def _float_list(raw: str, key: str) -> list[float]:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"key {key}: {exc}") from exc


@dataclass(frozen=True)
class Scenario:
    """Fully resolved scenario configuration (defaults applied, ranges checked)."""

    values: dict = field(repr=False)
    name: str = "scenario"

    def __getitem__(self, key):
        return self.values[key]

    def suites(self) -> dict[str, bool]:
        return {s: self.values[f"verify.{s}"] for s in SUITE_NAMES}


def scenario_from_config(values: dict, name: str = "scenario") -> Scenario:
    full = {}
    for key, (_, default) in _KEY_SPEC.items():
        full[key] = values.get(key, default)
    backend = full["geometry.backend"]
    if backend not in (WARPED_CIRCLE_SPHERE, DIAGONAL_TORUS):
        raise ConfigError(f"geometry.backend must be one of {WARPED_CIRCLE_SPHERE!r}, "
                          f"{DIAGONAL_TORUS!r}, got {backend!r}")
    if backend == WARPED_CIRCLE_SPHERE and full["geometry.fiber"] is None:
        raise ConfigError("geometry.fiber is required for the warped backend")
    if backend == DIAGONAL_TORUS:
        if full["geometry.fiber_b"] is None or full["geometry.fiber_c"] is None:
            raise ConfigError("geometry.fiber_b and geometry.fiber_c are required "
                              "for the torus backend")
        if full["geometry.n"] != 3:
            raise ConfigError("the torus backend is three-dimensional")
    for key, (lo, hi) in _RANGES.items():
        if not lo <= full[key] <= hi:
            raise ConfigError(f"key {key} = {full[key]} outside [{lo}, {hi}]")
    for key in ("geometry.radial", "run.t_end", "run.dt0", "entropy.eps",
                "kernel.sigma_w"):
        if not full[key] > 0:
            raise ConfigError(f"key {key} must be positive")
    m = full["phi.components"]
    for key in ("phi.amplitude", "phi.wavenumber", "phi.offset"):
        vals = _float_list(full[key], key)
        if m > 0 and len(vals) != m:
            raise ConfigError(f"key {key}: expected {m} comma-separated values")
    return Scenario(values=full, name=name)


def load_scenario(path) -> Scenario:
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return scenario_from_config(parse_config(path), name=name)


# ---------------------------------------------------------------------------
# presets


PRESETS: dict[str, tuple[str, dict]] = {
    "flat-torus-static": (
        "static flat three-torus with constant map; every quantity is a fixed point",
        {
            "geometry.backend": DIAGONAL_TORUS,
            "geometry.fiber_b": 1.0,
            "geometry.fiber_c": 1.0,
            "phi.amplitude": "0",
        },
    ),
    "shrinking-cylinder": (
        "round cylinder over the two-sphere, fiber radius 2; the fiber "
        "radius squared decreases linearly and every suite has a closed form",
        {
            "geometry.backend": WARPED_CIRCLE_SPHERE,
            "geometry.fiber": 2.0,
            "phi.amplitude": "0",
        },
    ),
    "list-flow-sine": (
        "cylinder coupled to a single sine mode of the scalar map; the "
        "coupled curvature stays positive along the run",
        {
            "geometry.backend": WARPED_CIRCLE_SPHERE,
            "geometry.fiber": 2.0,
            "phi.amplitude": "0.5",
        },
    ),
    "negative-S-torus": (
        "flat three-torus with a sine map mode; the coupled scalar curvature "
        "dips below zero, exercising the shifted-constant branches",
        {
            "geometry.backend": DIAGONAL_TORUS,
            "geometry.fiber_b": 1.0,
            "geometry.fiber_c": 1.0,
            "phi.amplitude": "0.3",
        },
    ),
}


def preset_scenario(name: str) -> Scenario:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    return scenario_from_config(dict(PRESETS[name][1]), name=name)


def list_presets() -> list[tuple[str, str]]:
    """Preset names with one-line descriptions."""
    return [(name, desc) for name, (desc, _) in PRESETS.items()]


# ---------------------------------------------------------------------------
# scenario assembly


def initial_state(scn: Scenario) -> CoupledState:
    v = scn.values
    backend = v["geometry.backend"]
    N, L = v["geometry.grid_points"], v["geometry.length"]
    if backend == WARPED_CIRCLE_SPHERE:
        init = {"f_rad": v["geometry.radial"], "h": v["geometry.fiber"]}
    else:
        init = {
            "a": v["geometry.radial"],
            "b": v["geometry.fiber_b"],
            "c": v["geometry.fiber_c"],
            "fiber_periods": (v["geometry.period_y"], v["geometry.period_z"]),
        }
    geom = build_geometry(backend, v["geometry.n"], N, L, init)
    x = geom.x()
    amps = _float_list(v["phi.amplitude"], "phi.amplitude")
    waves = _float_list(v["phi.wavenumber"], "phi.wavenumber")
    offs = _float_list(v["phi.offset"], "phi.offset")
    phi = tuple(
        GridField(off + amp * np.sin(2.0 * np.pi * k * x / L), L)
        for amp, k, off in zip(amps, waves, offs)
    )
    schedule = alpha_schedule(scn)
    return CoupledState(geom=geom, phi=phi, t=0.0, alpha=schedule.eval(0.0))


def alpha_schedule(scn: Scenario) -> AlphaSchedule:
    v = scn.values
    return AlphaSchedule(
        kind=v["alpha.kind"], alpha0=v["alpha.alpha0"],
        rate=v["alpha.rate"], floor=v["alpha.floor"],
    )


def output_dir(scn: Scenario, override=None) -> str:
    base = override or os.environ.get(OUTPUT_DIR_ENV) or "hrflab_out"
    path = os.path.join(base, scn.name)
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# shared constants context (Sobolev calibration reused by three suites)


@dataclass(frozen=True)
class ConstantsContext:
    A0: float
    B0: float
    S0: float
    lambda1_0: float

    def predicted(self, t: float) -> tuple[float, float]:
        return entropy_mod.sobolev_constants_predict(
            t, self.A0, self.B0, self.S0, self.lambda1_0
        )


def constants_context(state0: CoupledState, seed: int) -> ConstantsContext:
    A0, B0 = spectral_mod.estimate_initial_constants(state0, seed=seed)
    S0 = max(0.0, -float(np.min(curvature(state0).S.values)))
    lam1 = spectral_mod.lambda1_W(state0, A0, B0)
    if lam1.flagged_nonpositive:
        raise spectral_mod.SpectralError(
            f"lambda1 of the calibrated Sobolev operator is nonpositive ({lam1.lam:g})"
        )
    return ConstantsContext(A0, B0, S0, lam1.lam)


# ---------------------------------------------------------------------------
# suites


def entropy_suite(traj: Trajectory, scn: Scenario, out_dir: str) -> dict:
    v = scn.values
    records = entropy_mod.w_series(
        traj, v["entropy.eps"], traj.t_end, monotonicity_tol=None
    )
    entropy_mod.export_entropy_csv(records, os.path.join(out_dir, "entropy.csv"))
    ws = np.array([r.W for r in records])
    min_diff = float(np.min(np.diff(ws))) if len(ws) > 1 else 0.0
    worst_mismatch = 0.0
    match_ok = True
    for r in records[1:-1]:
        gap = abs(r.dW_fd - r.dW_rhs)
        tol = max(v["entropy.match_abs"], v["entropy.match_rel"] * abs(r.dW_rhs))
        worst_mismatch = max(worst_mismatch, gap)
        match_ok = match_ok and gap <= tol
    mass_dev = max(abs(r.mass - 1.0) for r in records)
    lam = np.array([r.lambda0 for r in records])
    lam_min_step = float(np.min(np.diff(lam))) if len(lam) > 1 else 0.0
    passed = (
        min_diff >= -v["entropy.mono_tol"]
        and match_ok
        and mass_dev <= v["entropy.mass_tol"]
        and lam_min_step >= -v["spectral.step_tol"]
    )
    return {
        "passed": passed,
        "min_W_step": min_diff,
        "worst_derivative_mismatch": worst_mismatch,
        "max_mass_deviation": mass_dev,
        "min_lambda0_step": lam_min_step,
        "records": records,
    }


def spectral_suite(traj: Trajectory, scn: Scenario, out_dir: str) -> dict:
    v = scn.values
    times = traj.times()
    lams = []
    for t in times:
        lams.append(spectral_mod.f_entropy_lambda0(traj.state_at(float(t))).lam)
    with open(os.path.join(out_dir, "spectral.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "lambda0"])
        for t, lam in zip(times, lams):
            writer.writerow([repr(float(t)), repr(float(lam))])
    min_step = float(np.min(np.diff(lams))) if len(lams) > 1 else 0.0
    result = {
        "passed": min_step >= -v["spectral.step_tol"],
        "min_lambda0_step": min_step,
        "lambda0_initial": lams[0],
        "lambda0_final": lams[-1],
        "lambda0_series": lams,
    }
    # static flat metrics admit an exact eigenmode expansion; compare against it
    try:
        state0 = heat_mod._require_static_constant(traj)
    except heat_mod.HeatError:
        state0 = None
    if state0 is not None:
        x = state0.geom.x()
        u0 = GridField(1.0 + np.sin(2.0 * np.pi * x / state0.geom.L), state0.geom.L)
        series = heat_mod.heat_forward(traj, u0, traj.t0, traj.t_end)
        worst = 0.0
        for t, f in zip(series.times, series.fields):
            if traj.t0 + 0.01 <= t <= traj.t0 + 1.0:
                ref = heat_mod.heat_spectral_reference(traj, u0, traj.t0, float(t))
                worst = max(worst, float(np.max(np.abs(f.values - ref.values))))
        result["oracle_sup_error"] = worst
        result["passed"] = result["passed"] and worst <= v["spectral.oracle_tol"]
    return result


def sobolev_suite(traj: Trajectory, scn: Scenario, out_dir: str,
                  ctx: ConstantsContext) -> dict:
    v = scn.values
    seed = v["seed"]
    geom0 = traj.geom0
    times = traj.times()
    trig = spectral_mod.trig_family(
        geom0.N, geom0.L, v["sobolev.family_size"], seed, counter=2
    )
    rows = []
    violations = 0
    min_quotient = math.inf
    for t in times:
        A, B = ctx.predicted(float(t) - traj.t0)
        rep = spectral_mod.sobolev_check(traj.state_at(float(t)), A, B, trig, seed=seed)
        violations += rep.violations
        min_quotient = min(min_quotient, rep.observed_min_quotient)
        rows.append((float(t), A, B, rep.observed_min_quotient, rep.violations))
    with open(os.path.join(out_dir, "sobolev.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "A", "B", "min_quotient", "violations"])
        for row in rows:
            writer.writerow([repr(row[0]), repr(row[1]), repr(row[2]), repr(row[3]), row[4]])

    n_samples = min(v["sobolev.sample_times"], len(times))
    sample_idx = sorted({int(round(i)) for i in
                         np.linspace(0, len(times) - 1, n_samples)})
    minimizer_min = math.inf
    for i in sample_idx:
        t = float(times[i])
        A, B = ctx.predicted(t - traj.t0)
        q, _ = spectral_mod.minimize_sobolev_quotient(traj.state_at(t), A, B)
        minimizer_min = min(minimizer_min, q)

    eps_grid = _float_list(v["sobolev.eps_grid"], "sobolev.eps_grid")
    bumps = spectral_mod.bump_family(geom0.N, geom0.L, v["sobolev.bumps"], seed, counter=3)
    worst_residual = math.inf
    for i in sample_idx:
        t = float(times[i])
        state = traj.state_at(t)
        w = state.geom.node_weights()
        for eps in eps_grid:
            for b in bumps:
                norm = math.sqrt(float(np.sum(w * b.values**2)))
                unit = GridField(b.values / norm, b.L)
                res = spectral_mod.log_sobolev_residual(
                    state, unit, eps, ctx.A0, ctx.B0, t - traj.t0
                )
                worst_residual = min(worst_residual, res)

    # truncation claim on seeded nonnegative fields at the initial state
    state0 = traj.checkpoints[0]
    A0_claim = ctx.A0
    B0_claim = ctx.B0
    n_trunc = v["sobolev.truncation_fields"]
    trunc_ok = True
    trunc_margin = math.inf
    if n_trunc > 0:
        fields = spectral_mod.trig_family(geom0.N, geom0.L, n_trunc, seed, counter=4)
        for f in fields:
            nonneg = GridField(np.abs(f.values), f.L)
            rep = spectral_mod.truncation_claim_check(state0, nonneg, A0_claim, B0_claim)
            slack = rep.rhs + 50.0 * geom0.dx - rep.lhs_sum
            trunc_margin = min(trunc_margin, slack)
            trunc_ok = trunc_ok and slack >= 0.0

    passed = (
        violations == 0
        and minimizer_min >= 1.0 - 1e-9
        and worst_residual >= -v["sobolev.logsob_tol"]
        and trunc_ok
    )
    return {
        "passed": passed,
        "A0": ctx.A0,
        "B0": ctx.B0,
        "S0": ctx.S0,
        "lambda1_initial": ctx.lambda1_0,
        "violations": violations,
        "min_quotient": min_quotient,
        "minimizer_min_quotient": minimizer_min,
        "min_log_sobolev_residual": worst_residual,
        "truncation_min_slack": trunc_margin if n_trunc > 0 else None,
    }


def kernel_suite(traj: Trajectory, scn: Scenario, out_dir: str,
                 ctx: ConstantsContext) -> dict:
    v = scn.values
    geom0 = traj.geom0
    y = v["kernel.source_node"]
    if y < 0:
        y = geom0.N // 2
    est = heat_mod.heat_kernel(traj, y, traj.t0, v["kernel.sigma_w"])
    heat_mod.export_kernel_csv(est, traj, os.path.join(out_dir, "kernel.csv"))
    A_T, _ = ctx.predicted(traj.t_end - traj.t0)
    constants = moser_mod.moser_constants(geom0.n, 2.0, A_T)
    report = heat_mod.kernel_bound_check(est, traj, constants, ctx.S0)
    tol = v["kernel.mass_tol"]
    if ctx.S0 == 0.0:
        mass_ok = bool(np.all(est.masses <= 1.0 + tol))
        worst_mass = float(np.max(est.masses))
    else:
        caps = np.exp(ctx.S0 * (est.times - traj.t0)) + tol
        mass_ok = bool(np.all(est.masses <= caps))
        worst_mass = float(np.max(est.masses - caps + tol))
    return {
        "passed": report.all_pass and mass_ok,
        "C": report.C,
        "S0": ctx.S0,
        "max_ratio": report.max_ratio,
        "n_excluded": report.n_excluded,
        "mass_ok": mass_ok,
        "worst_mass": worst_mass,
        "estimate": est,
        "bound_report": report,
    }


def moser_suite(traj: Trajectory, scn: Scenario, out_dir: str,
                ctx: ConstantsContext) -> dict:
    v = scn.values
    geom0 = traj.geom0
    x = geom0.x()
    u0 = GridField(1.0 + np.cos(2.0 * np.pi * x / geom0.L) ** 2, geom0.L)
    series = heat_mod.heat_forward(traj, u0, traj.t0, traj.t_end)
    A_T, _ = ctx.predicted(traj.t_end - traj.t0)
    constants = moser_mod.moser_constants(geom0.n, 2.0, A_T)
    p_values = _float_list(v["moser.p_values"], "moser.p_values")
    reports = {}
    passed = True
    for p in p_values:
        rep = moser_mod.sup_bound_check(traj, series, v["moser.a"], p, constants, ctx.S0)
        moser_mod.export_sup_bound_csv(
            rep, os.path.join(out_dir, f"moser_p{p:g}.csv")
        )
        reports[p] = rep
        passed = passed and rep.all_pass
    ident = abs(constants.exponent_sum() - (geom0.n + 2.0) / (2.0 * constants.p0))
    return {
        "passed": passed and ident <= 1e-12,
        "p_values": p_values,
        "max_ratios": {repr(p): reports[p].max_ratio for p in p_values},
        "exponent_identity_gap": ident,
        "reports": reports,
    }


# ---------------------------------------------------------------------------
# flow summary and orchestration


def export_flow_csv(traj: Trajectory, path) -> None:
    """CSV columns: t, per-coefficient min and max, S min and max, volume."""
    names = sorted(traj.geom0.coeffs)
    header = ["t"]
    for name in names:
        header += [f"{name}_min", f"{name}_max"]
    header += ["S_min", "S_max", "volume"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for st in traj.checkpoints:
            S = curvature(st).S.values
            row = [repr(float(st.t))]
            for name in names:
                vals = st.geom.coeffs[name].values
                row += [repr(float(np.min(vals))), repr(float(np.max(vals)))]
            row += [repr(float(np.min(S))), repr(float(np.max(S))),
                    repr(float(st.geom.volume()))]
            writer.writerow(row)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()
                if k not in ("records", "estimate", "bound_report", "reports",
                             "lambda0_series")}
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def run_scenario(scn: Scenario, out_dir_override=None,
                 only_suite: str | None = None) -> tuple[int, dict]:
    """Run the flow and every enabled suite; write reports; return
    (exit status, report dict).  Status 0 iff all enabled checks passed."""
    out = output_dir(scn, out_dir_override)
    v = scn.values
    report = {
        "scenario": scn.name,
        "seed": v["seed"],
        "config": {k: val for k, val in sorted(v.items()) if val is not None},
        "suites": {},
    }
    state0 = initial_state(scn)
    schedule = alpha_schedule(scn)
    controls = FlowControls(dt0=v["run.dt0"])
    try:
        traj = run(state0, schedule, v["run.t_end"], controls,
                   n_checkpoints=v["run.checkpoints"])
    except BlowUpError as exc:
        report["flow"] = {"passed": False, "error": str(exc)}
        report["overall_pass"] = False
        _write_report(report, out)
        return 1, report
    except FlowError as exc:
        report["flow"] = {"passed": False, "error": str(exc)}
        report["overall_pass"] = False
        _write_report(report, out)
        return 1, report

    report["flow"] = {
        "passed": not traj.terminated_early,
        "n_steps": traj.n_steps,
        "n_rejections": traj.n_rejections,
        "dt_final": traj.dt_final,
    }
    export_flow_csv(traj, os.path.join(out, "flow.csv"))
    save_checkpoints(traj, os.path.join(out, "checkpoints.json"))
    if traj.terminated_early:
        # extinction mid-run: keep the partial flow reports, skip the suites
        report["flow"]["error"] = traj.termination_reason
        report["overall_pass"] = False
        _write_report(report, out)
        return 1, report

    toggles = scn.suites()
    if only_suite is not None:
        if only_suite not in SUITE_NAMES:
            raise ConfigError(f"unknown suite {only_suite!r}; known: "
                              f"{', '.join(SUITE_NAMES)}")
        toggles = {s: (s == only_suite) for s in SUITE_NAMES}

    ctx = None
    if toggles["sobolev"] or toggles["kernel"] or toggles["moser"]:
        ctx = constants_context(traj.checkpoints[0], v["seed"])

    results = {}
    if toggles["entropy"]:
        results["entropy"] = entropy_suite(traj, scn, out)
    if toggles["spectral"]:
        results["spectral"] = spectral_suite(traj, scn, out)
    if toggles["sobolev"]:
        results["sobolev"] = sobolev_suite(traj, scn, out, ctx)
    if toggles["kernel"]:
        results["kernel"] = kernel_suite(traj, scn, out, ctx)
    if toggles["moser"]:
        results["moser"] = moser_suite(traj, scn, out, ctx)

    report["suites"] = results
    overall = all(r["passed"] for r in results.values())
    report["overall_pass"] = overall
    _write_report(report, out)

    from . import plots

    plots.render_scenario(traj, results, out)
    return (0 if overall else 1), report


def _write_report(report: dict, out_dir: str) -> None:
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
