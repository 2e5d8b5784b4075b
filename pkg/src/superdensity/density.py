"""Density quotients, m-density-point verdicts and density-degree estimation."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import unit_ball_volume
from .measure_core import (Ball, ContractViolation, ImplicitRegion, QuadratureSpec,
                           Measurement, integrate, residual_measure, symmetric_difference,
                           rasterize, Box)

ZERO, FINITE, INFINITE = "zero", "finite", "infinite"
HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"


@dataclass(frozen=True)
class RadiusLadder:
    r0: float = 2.0 ** -4
    ratio: float = 0.5
    rungs: int = 8

    def __post_init__(self):
        if not self.r0 > 0:
            raise ContractViolation("r0 must be positive")
        if not 0 < self.ratio < 1:
            raise ContractViolation("ratio must lie in (0, 1)")
        if self.rungs < 4:
            raise ContractViolation("a ladder needs at least 4 rungs")

    @property
    def radii(self):
        return self.r0 * self.ratio ** np.arange(self.rungs)


@dataclass(frozen=True)
class EstimatorConfig:
    """Thresholds of the degree classifier and the verdict rule."""

    theta: float = 0.05
    fit_rungs: int = 5
    verdict_rungs: int = 3
    sigma_band: float = 3.0
    beta_min: float = 0.05


DEFAULT_ESTIMATOR = EstimatorConfig()


@dataclass(frozen=True)
class DensityQuotient:
    x: tuple
    r: float
    m: float
    value: float
    error: float
    residual: Measurement = field(default=None, repr=False, compare=False)

    @property
    def below_floor(self):
        return self.residual.below_floor if self.residual is not None else self.value <= 2 * self.error


@dataclass(frozen=True)
class Rung:
    r: float
    residual: float
    residual_err: float
    quotient_n: float

    @property
    def below_floor(self):
        return self.residual <= 2.0 * self.residual_err


@dataclass(frozen=True)
class DegreeEstimate:
    x: tuple
    cls: str
    exponent: Optional[float]
    stderr: float
    rungs_used: int
    diagnostics: tuple
    flags: tuple = ()

    @property
    def conclusive(self):
        return "insufficient_rungs" not in self.flags

    def order_key(self):
        """Position in the ordered set ``{0} < [n, inf) < {inf}``."""
        if self.cls == ZERO:
            return 0.0
        if self.cls == INFINITE:
            return math.inf
        return float(self.exponent)


def _point(x, n):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != n:
        raise ContractViolation(f"point has dimension {x.size}, region has {n}")
    return x


def density_quotient(E, x, r, m, q=None):
    n = E.dimension
    x = _point(x, n)
    if not r > 0:
        raise ContractViolation("radius must be positive")
    if m < n:
        raise ContractViolation(f"m must be at least n = {n}")
    res = residual_measure(E, Ball(x, r), q)
    scale = r ** m
    return DensityQuotient(tuple(x), float(r), float(m), res.value / scale, res.error / scale, res)


def ladder_table(E, x, ladder, q=None):
    n = E.dimension
    x = _point(x, n)
    rows = []
    for r in ladder.radii:
        res = residual_measure(E, Ball(x, r), q)
        rows.append(Rung(float(r), res.value, res.error, res.value / r ** n))
    return tuple(rows)


def _slope(logr, logv, weights=None):
    """OLS slope and its standard error."""
    k = len(logr)
    A = np.vstack([logr, np.ones(k)]).T
    coef, *_ = np.linalg.lstsq(A, logv, rcond=None)
    if k <= 2:
        return float(coef[0]), 0.0, float(coef[1])
    resid = logv - A @ coef
    s2 = float(resid @ resid) / (k - 2)
    sxx = float(np.sum((logr - logr.mean()) ** 2))
    return float(coef[0]), math.sqrt(s2 / sxx), float(coef[1])


def is_m_density_point(E, x, m, ladder, q=None, config=DEFAULT_ESTIMATOR, table=None):
    """Verdict from the quotients at the smallest ``config.verdict_rungs`` rungs.

    With quotients ``Q(r) = residual / r^m`` and ``beta`` the log-log slope of Q
    in r: holds when every residual is below floor, or when Q decreases and
    ``beta`` exceeds both ``beta_min`` and its 3-sigma band; fails when ``beta``
    sits below ``beta_min`` by 3 sigma and every quotient is clearly nonzero.
    """
    n = E.dimension
    if m < n:
        raise ContractViolation(f"m must be at least n = {n}")
    table = table if table is not None else ladder_table(E, x, ladder, q)
    tail = table[-config.verdict_rungs:]
    if all(t.below_floor for t in tail):
        return HOLDS
    if any(t.below_floor for t in tail):
        return INCONCLUSIVE
    r = np.array([t.r for t in tail])
    v = np.array([t.residual for t in tail])
    e = np.array([t.residual_err for t in tail])
    logq = np.log(v) - m * np.log(r)
    beta, sb, _ = _slope(np.log(r), logq)
    rel = e / v
    sb = math.hypot(sb, float(np.max(rel)) * 2.0 / max(float(np.ptp(np.log(r))), 1e-300))
    band = config.sigma_band * sb
    qv = np.exp(logq)
    decreasing = bool(np.all(np.diff(qv) <= (e[1:] + e[:-1]) / r[1:] ** m))
    if beta > max(band, config.beta_min) and decreasing:
        return HOLDS
    if beta <= config.beta_min - band and np.all(v > config.sigma_band * e):
        return FAILS
    return INCONCLUSIVE


def estimate_degree(E, x, ladder, q=None, config=DEFAULT_ESTIMATOR, table=None):
    n = E.dimension
    x = _point(x, n)
    table = table if table is not None else ladder_table(E, x, ladder, q)
    omega = unit_ball_volume(n)
    flags = []
    tail = table[-config.verdict_rungs:]
    if all(t.below_floor for t in tail):
        if not bool(E.bbox.contains(x)[0]):
            return DegreeEstimate(tuple(x), ZERO, None, 0.0, 0, table, ("outside_bbox",))
        return DegreeEstimate(tuple(x), INFINITE, None, 0.0, 0, table)
    usable = [t for t in table if not t.below_floor]
    low = usable[-config.verdict_rungs:]
    if np.mean([t.quotient_n for t in low]) > config.theta * omega:
        return DegreeEstimate(tuple(x), ZERO, None, 0.0, len(low), table)
    fit = usable[-config.fit_rungs:]
    if len(fit) < 4:
        flags.append("insufficient_rungs")
    if len(fit) < 2:
        return DegreeEstimate(tuple(x), FINITE, float(n), math.inf, len(fit), table, tuple(flags))
    logr = np.log([t.r for t in fit])
    logv = np.log([t.residual for t in fit])
    s, se, _ = _slope(logr, logv)
    rel = max(t.residual_err / t.residual for t in fit)
    se = math.hypot(se, rel / max(float(np.ptp(logr)), 1e-300))
    return DegreeEstimate(tuple(x), FINITE, max(s, float(n)), se, len(fit), table, tuple(flags))


# ---------------------------------------------------------------- test functions

@dataclass(frozen=True)
class TestFunction:
    """A compactly supported scalar field ``phi`` with declared support radius."""

    phi: Callable
    support_radius: float
    label: str = ""


def bump(z):
    """``exp(-1 / (1 - |z|^2))`` on the unit ball, zero outside."""
    s = np.sum(np.asarray(z) ** 2, axis=-1)
    out = np.zeros_like(s)
    inside = s < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside]))
    return out


BUMP = TestFunction(bump, 1.0, "bump")


def plateau(z):
    """Equal to 1 on the unit ball, smoothly decaying to 0 at radius 2."""
    s = np.sqrt(np.sum(np.asarray(z) ** 2, axis=-1))
    t = np.clip(s - 1.0, 0.0, 1.0)
    a = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    b = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    return a / (a + b)


PLATEAU = TestFunction(plateau, 2.0, "plateau")


def test_function_residual(E, x, r, g, phi, q=None):
    """``∫_{E^c} g(y) phi((y - x) / r) dy`` over ``B(x, r R)``."""
    if not isinstance(phi, TestFunction) or not phi.support_radius > 0:
        raise ContractViolation("test function needs a declared positive support radius")
    n = E.dimension
    x = _point(x, n)

    def weight(y):
        return g(y) * phi.phi((y - x) / r)

    return integrate(E, Ball(x, r * phi.support_radius), weight, q)


def default_battery():
    """Pairs ``(g, phi)`` with ``g(x) != 0`` near the origin."""
    return (
        ("g=1,bump", lambda y: np.ones(len(y)), BUMP),
        ("g=1,plateau", lambda y: np.ones(len(y)), PLATEAU),
        ("g=1+y1,bump", lambda y: 1.0 + 0.5 * y[:, 0], BUMP),
        ("g=2-|y|^2,plateau", lambda y: 2.0 - np.sum(y ** 2, axis=1), PLATEAU),
    )


def _decay_verdict(rs, vals, errs, m, config):
    if np.all(vals <= 2 * errs):
        return HOLDS, math.inf
    if np.any(vals <= 2 * errs):
        return INCONCLUSIVE, math.nan
    logr = np.log(rs)
    s, se, _ = _slope(logr, np.log(vals))
    se = math.hypot(se, float(np.max(errs / vals)) * 2 / max(float(np.ptp(logr)), 1e-300))
    beta = s - m
    band = config.sigma_band * se
    if beta > max(band, config.beta_min):
        return HOLDS, s
    if beta <= config.beta_min - band:
        return FAILS, s
    return INCONCLUSIVE, s


@dataclass(frozen=True)
class CharacterizationReport:
    x: tuple
    m: float
    verdict: str
    pairs: tuple

    @property
    def consistent(self):
        decided = [v for _, _, v in self.pairs if v != INCONCLUSIVE]
        if self.verdict == INCONCLUSIVE:
            return True
        return all(v == self.verdict for v in decided)


def characterization_check(E, x, m, ladder, q=None, battery=None, config=DEFAULT_ESTIMATOR):
    battery = battery if battery is not None else default_battery()
    if not battery:
        raise ContractViolation("battery must be nonempty")
    verdict = is_m_density_point(E, x, m, ladder, q, config)
    rs = ladder.radii[-config.verdict_rungs:]
    pairs = []
    for name, g, phi in battery:
        ms = [test_function_residual(E, x, r, g, phi, q) for r in rs]
        vals = np.abs([mm.value for mm in ms])
        errs = np.array([mm.error for mm in ms])
        v, s = _decay_verdict(rs, vals, errs, m, config)
        pairs.append((name, s, v))
    return CharacterizationReport(tuple(np.ravel(x)), float(m), verdict, tuple(pairs))


def test_function_slope(E, x, ladder, g, phi, q=None, rungs=5):
    rs = ladder.radii[-rungs:]
    vals = np.array([abs(test_function_residual(E, x, r, g, phi, q).value) for r in rs])
    s, se, _ = _slope(np.log(rs), np.log(vals))
    return s, se


# ---------------------------------------------------------------- set laws

@dataclass(frozen=True)
class LawReport:
    checked: int
    skipped: int
    intersection_violations: tuple
    union_violations: tuple
    rows: tuple

    @property
    def violations(self):
        return len(self.intersection_violations) + len(self.union_violations)


def _leq(a, b, tol):
    """``a <= b + tol`` in ``{0} < [n, inf) < {inf}``."""
    ka, kb = a.order_key(), b.order_key()
    if math.isinf(kb) or ka == 0:
        return True
    if math.isinf(ka) or kb == 0:
        return False
    return ka <= kb + tol


def degree_law_suite(E, F, samples, ladder, q=None, tol=None, config=DEFAULT_ESTIMATOR):
    """Checks ``d_{E∩F} <= min`` and ``d_{E∪F} >= max`` at every sample."""
    from .measure_core import intersect, union
    if E.dimension != F.dimension:
        raise ContractViolation("regions have different dimensions")
    EF, EuF = intersect(E, F), union(E, F)
    inter_bad, union_bad, rows = [], [], []
    skipped = 0
    for x in samples:
        est = [estimate_degree(R, x, ladder, q, config) for R in (E, F, EF, EuF)]
        if not all(e.conclusive for e in est):
            skipped += 1
            continue
        dE, dF, dI, dU = est
        t = tol if tol is not None else 3 * max(e.stderr for e in est if math.isfinite(e.stderr)) + 0.1
        lo = dE if dE.order_key() <= dF.order_key() else dF
        hi = dF if lo is dE else dE
        ok_i = _leq(dI, lo, t)
        ok_u = _leq(hi, dU, t)
        rows.append((tuple(np.ravel(x)), dE, dF, dI, dU, ok_i, ok_u))
        if not ok_i:
            inter_bad.append(tuple(np.ravel(x)))
        if not ok_u:
            union_bad.append(tuple(np.ravel(x)))
    return LawReport(len(rows), skipped, tuple(inter_bad), tuple(union_bad), tuple(rows))


@dataclass(frozen=True)
class EquivalenceReport:
    rows: tuple
    disagreements: tuple

    @property
    def agree(self):
        return not self.disagreements


def equivalence_invariance_check(E, N, samples, ladder, q=None, spacing=None, window=None,
                                 config=DEFAULT_ESTIMATOR):
    """Estimates on E and on ``E Δ N`` agree when N is null at the test resolution."""
    n = E.dimension
    window = window or E.bbox.hull(N.bbox)
    spacing = spacing or min(window.sides) / 512
    null = rasterize(N, spacing, window).measure()
    if null > 0:
        raise ContractViolation(f"perturbation has grid measure {null:g} at spacing {spacing:g}")
    EN = symmetric_difference(E, N)
    generic = (q or QuadratureSpec()).generic()
    rows, bad = [], []
    for x in samples:
        a = estimate_degree(E, x, ladder, generic, config)
        b = estimate_degree(EN, x, ladder, generic, config)
        same = a.cls == b.cls
        if same and a.cls == FINITE:
            same = abs(a.exponent - b.exponent) <= max(a.stderr, b.stderr, 1e-12) * 1.0 + 1e-9
        rows.append((tuple(np.ravel(x)), a, b, same))
        if not same:
            bad.append(tuple(np.ravel(x)))
    return EquivalenceReport(tuple(rows), tuple(bad))


# ---------------------------------------------------------------- output

def csv_header(n):
    return [f"x_{i + 1}" for i in range(n)] + [
        "r", "residual", "residual_err", "quotient_n", "class", "exponent", "stderr"]


def write_csv(estimates, n, stream=None):
    """Diagnostic table, one row per (estimate, rung)."""
    out = stream or io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(csv_header(n))
    for est in estimates:
        exp = "" if est.exponent is None else f"{est.exponent:.10g}"
        se = f"{est.stderr:.10g}"
        for row in est.diagnostics:
            w.writerow([f"{v:.10g}" for v in est.x] + [
                f"{row.r:.10g}", f"{row.residual:.10g}", f"{row.residual_err:.10g}",
                f"{row.quotient_n:.10g}", est.cls, exp, se])
    return out.getvalue() if stream is None else None


def plot_estimate(est, path):
    """Log-log residual plot with the fitted line, written as SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [t for t in est.diagnostics if t.residual > 0]
    fig, ax = plt.subplots(figsize=(4, 3))
    if rows:
        r = np.array([t.r for t in rows])
        v = np.array([t.residual for t in rows])
        ax.loglog(r, v, "o", label="residual")
        if est.cls == FINITE:
            c = np.exp(np.mean(np.log(v[-est.rungs_used:]) - est.exponent * np.log(r[-est.rungs_used:])))
            ax.loglog(r, c * r ** est.exponent, "-", label=f"slope {est.exponent:.3f}")
        ax.legend()
    ax.set_xlabel("r")
    ax.set_ylabel("residual")
    ax.set_title(f"{est.cls} at {tuple(round(v, 4) for v in est.x)}")
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "superdensity"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
