import time

import numpy as np
import pytest

from hrflab import entropy as entropy_mod
from hrflab import harness
from hrflab.flow import FlowControls, run

SESSION_START = time.time()

PRESET_NAMES = (
    "flat-torus-static",
    "shrinking-cylinder",
    "list-flow-sine",
    "negative-S-torus",
)

# presets with nonnegative coupled scalar curvature along the whole run
NONNEGATIVE_S = ("flat-torus-static", "shrinking-cylinder", "list-flow-sine")


def run_preset(name):
    scn = harness.preset_scenario(name)
    state0 = harness.initial_state(scn)
    schedule = harness.alpha_schedule(scn)
    traj = run(
        state0,
        schedule,
        scn["run.t_end"],
        FlowControls(dt0=scn["run.dt0"]),
        n_checkpoints=scn["run.checkpoints"],
    )
    return scn, traj


@pytest.fixture(scope="session")
def preset_runs():
    """Flow trajectories for every preset, shared across the whole session."""
    return {name: run_preset(name) for name in PRESET_NAMES}


@pytest.fixture(scope="session")
def entropy_records(preset_runs):
    """w_series output per preset (conjugate solution ending at t_end)."""
    out = {}
    for name, (scn, traj) in preset_runs.items():
        out[name] = entropy_mod.w_series(
            traj, scn["entropy.eps"], traj.t_end, monotonicity_tol=None
        )
    return out


@pytest.fixture(scope="session")
def constants_contexts(preset_runs):
    """Calibrated initial Sobolev constants per preset."""
    out = {}
    for name, (scn, traj) in preset_runs.items():
        out[name] = harness.constants_context(traj.checkpoints[0], scn["seed"])
    return out


def small_scenario(**overrides):
    """A quick torus scenario for harness-level tests."""
    values = {
        "geometry.backend": "diagonal_torus",
        "geometry.fiber_b": 1.0,
        "geometry.fiber_c": 1.0,
        "geometry.grid_points": 64,
        "phi.amplitude": "0.3",
        "run.t_end": 0.2,
        "run.checkpoints": 16,
        "kernel.sigma_w": 0.25,  # the mollifier must span a few cells at N = 64
        "sobolev.family_size": 6,
        "sobolev.bumps": 3,
        "sobolev.truncation_fields": 3,
    }
    values.update(overrides)
    return harness.scenario_from_config(values, name="small")
