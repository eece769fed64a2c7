"""Figure rendering for scenario reports.

Each enabled suite gets one PNG next to its CSV: coefficient extrema along
the run, the entropy series with both derivative estimates, kernel profiles
at a few resolved times, and the sup-bound ratio per exponent.  Rendering
uses the Agg backend so it works headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .flow import Trajectory


def plot_flow(traj: Trajectory, path) -> None:
    times = traj.times()
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in sorted(traj.geom0.coeffs):
        lo = [float(np.min(st.geom.coeffs[name].values)) for st in traj.checkpoints]
        hi = [float(np.max(st.geom.coeffs[name].values)) for st in traj.checkpoints]
        (line,) = ax.plot(times, lo, label=name)
        ax.plot(times, hi, linestyle="--", color=line.get_color())
    ax.set_xlabel("t")
    ax.set_ylabel("coefficient extrema")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_entropy(records, path) -> None:
    ts = [r.t for r in records]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax1.plot(ts, [r.W for r in records], marker=".")
    ax1.set_ylabel("W")
    interior = records[1:-1]
    ax2.plot([r.t for r in interior], [r.dW_fd for r in interior], label="finite difference")
    ax2.plot(ts, [r.dW_rhs for r in records], linestyle="--", label="formula")
    ax2.set_xlabel("t")
    ax2.set_ylabel("dW/dt")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_kernel(est, traj: Trajectory, path) -> None:
    x = traj.geom0.x()
    resolved = [(t, f) for t, f in zip(est.times, est.fields) if est.resolved(t)]
    picks = resolved[:: max(1, len(resolved) // 4)][:4] if resolved else []
    fig, ax = plt.subplots(figsize=(6, 4))
    for t, f in picks:
        ax.plot(x, f.values, label=f"t = {float(t):.3g}")
    ax.set_xlabel("x")
    ax.set_ylabel("G(x, t)")
    if picks:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_moser(reports: dict, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for p, rep in sorted(reports.items()):
        ax.semilogy([r.t for r in rep.rows], [max(r.ratio, 1e-300) for r in rep.rows],
                    label=f"p = {p:g}")
    ax.axhline(1.0, color="k", linewidth=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("sup / bound")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_scenario(traj: Trajectory, results: dict, out_dir: str) -> None:
    plot_flow(traj, os.path.join(out_dir, "flow.png"))
    if "entropy" in results:
        plot_entropy(results["entropy"]["records"], os.path.join(out_dir, "entropy.png"))
    if "kernel" in results:
        plot_kernel(results["kernel"]["estimate"], traj, os.path.join(out_dir, "kernel.png"))
    if "moser" in results:
        plot_moser(results["moser"]["reports"], os.path.join(out_dir, "moser.png"))
