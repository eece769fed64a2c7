"""Explicit parabolic sup-estimate constants and the sup-bound verification.

The iteration exponents p_k = p0 * chi^k with chi = 1 + 2/n give, in closed
form,

    sum_k 1/p_k       = (n+2)/(2 p0)          (geometric series, ratio 1/chi)
    sum_k 1/p_{k+1}   = n/(2 p0)
    sum_k k/p_k       = n (n+2)/(4 p0)        (arithmetico-geometric series)

so the iteration product constant is

    C0 = (4^{1+1/n} A)^{n/(2 p0)} * chi^{n (n+2)/(4 p0)}

and C1 = C0^{2 p0/(n+2)} * p0, C2 = C0^{2 p0/(n+2)} * (n+2)/2 satisfy
C0 * [a p0 + (n+2)/(2 dt)]^{(n+2)/(2 p0)} = [C1 a + C2/dt]^{(n+2)/(2 p0)}
exactly for all a, dt > 0.

For 0 < p < 2 the constants come from the p0 = 2 case via a Young-inequality
step and a geometric re-iteration with theta chosen so the contraction factor
of the series is sqrt(2); see ``constants_for_p``.  The negative-lower-bound
coefficient is C1/4, from absorbing the S-shift into the zeroth-order term
(a (p+1) + S0/2 <= (a + S0/4)(p+1) for the exponents p+1 >= 2 reached by
the iteration).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class MoserError(ValueError):
    pass


def _c0(n: int, p0: float, A: float) -> float:
    chi = 1.0 + 2.0 / n
    return (4.0 ** (1.0 + 1.0 / n) * A) ** (n / (2.0 * p0)) * chi ** (n * (n + 2.0) / (4.0 * p0))


def _c1_c2(n: int, p0: float, A: float) -> tuple[float, float]:
    c0 = _c0(n, p0, A)
    scale = c0 ** (2.0 * p0 / (n + 2.0))
    return scale * p0, scale * (n + 2.0) / 2.0


@dataclass(frozen=True)
class MoserConstants:
    """Assembled iteration constants; one admissible (non-sharp) choice."""

    n: int
    p0: float
    chi: float
    A: float
    C0: float
    C1: float
    C2: float
    C0_neg: float

    def exponent_sum(self) -> float:
        """sum_k 1/p_k in closed form; equals (n+2)/(2 p0)."""
        return (self.n + 2.0) / (2.0 * self.p0)

    def constants_for_p(self, p: float) -> tuple[float, float, float]:
        """(C1, C2, C0_neg) valid at integrability exponent p > 0."""
        if not p > 0:
            raise MoserError("p must be positive")
        n = self.n
        if p >= 2.0:
            c1, c2 = _c1_c2(n, p, self.A)
            return c1, c2, c1 / 4.0
        # Young step from the p0 = 2 bound, then the geometric re-iteration
        # with 2 theta^beta = sqrt(2).
        c1_2, c2_2 = _c1_c2(n, 2.0, self.A)
        beta = (n + 2.0) / (2.0 * p)
        k_young = (p / 2.0) * (2.0 - p) ** ((2.0 - p) / p)
        theta = 2.0 ** (-1.0 / (2.0 * beta))
        series = 1.0 / (1.0 - 2.0 ** (-0.5))
        mult = (k_young * series) ** (1.0 / beta)
        c1 = mult * c1_2
        c2 = mult * c2_2 / (1.0 - theta)
        return c1, c2, c1 / 4.0


def moser_constants(n: int, p0: float = 2.0, A: float = 1.0) -> MoserConstants:
    """Assemble the iteration constants for dimension n, base exponent p0,
    and Sobolev constant A."""
    if n < 3:
        raise MoserError("n must be at least 3")
    if p0 < 2:
        raise MoserError("base exponent p0 must be >= 2 (smaller p via constants_for_p)")
    if not A > 0:
        raise MoserError("Sobolev constant A must be positive")
    c0 = _c0(n, p0, A)
    c1, c2 = _c1_c2(n, p0, A)
    return MoserConstants(
        n=n, p0=p0, chi=1.0 + 2.0 / n, A=A, C0=c0, C1=c1, C2=c2, C0_neg=c1 / 4.0
    )


@dataclass(frozen=True)
class SupBoundRow:
    t: float
    sup_f: float
    bound: float
    ratio: float
    passed: bool


@dataclass(frozen=True)
class SupBoundReport:
    p: float
    a: float
    S0: float
    spacetime_integral: float
    rows: tuple[SupBoundRow, ...]
    all_pass: bool
    max_ratio: float


def sup_bound_check(
    traj,
    f_series,
    a: float,
    p: float,
    constants: MoserConstants,
    S0: float = 0.0,
) -> SupBoundReport:
    """Verify sup_x f(x,t) <= (C0_neg S0 + C1 a + C2/(t - t_start))^{(n+2)/(2p)}
    * (integral over the window of f^p dmu dt)^{1/p} at every sampled time.

    ``f_series`` is a heat.FieldSeries; the caller attests that f is a
    nonnegative subsolution (the harness only feeds exact heat solutions).
    The space-time integral uses the trapezoid rule over the series times
    with the evolving measure.
    """
    if a < 0 or S0 < 0:
        raise MoserError("a and S0 must be nonnegative")
    n = traj.geom0.n
    times = f_series.times
    t_start = times[0]
    space = []
    for t, f in zip(times, f_series.fields):
        vals = f.values
        if float(np.min(vals)) < -1e-10:
            raise MoserError(f"negative field values at t = {t:g}")
        w = traj.state_at(float(t)).geom.node_weights()
        space.append(float(np.sum(w * np.maximum(vals, 0.0) ** p)))
    integral = float(np.trapezoid(space, times))
    c1, c2, c0_neg = constants.constants_for_p(p)
    expo = (n + 2.0) / (2.0 * p)
    rows = []
    all_pass = True
    max_ratio = 0.0
    for t, f in zip(times, f_series.fields):
        dt = float(t - t_start)
        if dt <= 0:
            continue
        sup_f = float(np.max(f.values))
        bound = (c0_neg * S0 + c1 * a + c2 / dt) ** expo * integral ** (1.0 / p)
        ratio = sup_f / bound
        ok = ratio <= 1.0 + 1e-12
        rows.append(SupBoundRow(float(t), sup_f, bound, ratio, ok))
        all_pass = all_pass and ok
        max_ratio = max(max_ratio, ratio)
    return SupBoundReport(p, a, S0, integral, tuple(rows), all_pass, max_ratio)


def export_sup_bound_csv(report: SupBoundReport, path) -> None:
    """CSV columns (t, sup_f, bound, ratio, pass)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "sup_f", "bound", "ratio", "pass"])
        for r in report.rows:
            writer.writerow([repr(r.t), repr(r.sup_f), repr(r.bound), repr(r.ratio), int(r.passed)])
