"""Approximating a prescribed density-degree function by closed sets.

Pipeline per stage k:

1. ``simple_stage``: quantize the target from below to levels ``n + j 2^-k``
   capped at ``n + k``.
2. ``rectangle_stage``: cover each level set by maximal dyadic squares of
   side at least ``2^-k`` and raise each value by ``1/k``; every square is
   shrunk by ``2^(-k-4)`` per side so that the closed squares are disjoint.
3. ``synthesize_F_k``: inside each square build a closed set whose degree is
   the square's value (graded removal, or Swiss cheese in the degree-n regime).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .density import (DEFAULT_ESTIMATOR, FINITE, INFINITE, ZERO, DegreeEstimate,
                      RadiusLadder, estimate_degree)
from .gallery import DyadicRemoval, _shift, graded_fractions, swiss_fractions
from .geometry import ball_volume, disc_box_area
from .measure_core import (Box, ContractViolation, ImplicitRegion, QuadratureSpec,
                           rasterize)

GAP_EXTRA = 4


@dataclass(frozen=True, eq=False)
class TargetFunction:
    """``f`` on a bounded window with values in ``{0} ∪ [n, inf]``."""

    f: Callable
    window: Box
    label: str = "f"

    @property
    def n(self):
        return self.window.dimension

    def __call__(self, points):
        return np.asarray(self.f(np.atleast_2d(points)), dtype=float)

    def tilde(self, points):
        """Values outside ``{0} ∪ [n, inf]`` (and NaN) are replaced by 0."""
        v = self(points)
        return np.where((v >= self.n) & ~np.isnan(v), v, 0.0)


def indicator_target(value, box, window, label=None):
    box = box if isinstance(box, Box) else Box(*box)
    return TargetFunction(lambda p: np.where(box.contains(p), float(value), 0.0), window,
                          label or f"{value:g}*chi")


def piecewise_target(pieces, window, label="piecewise"):
    """``sum value * chi_box`` over half-open boxes ``[lower, upper)``."""
    pieces = [(float(v), b if isinstance(b, Box) else Box(*b)) for v, b in pieces]

    def f(p):
        out = np.zeros(len(p))
        for v, b in pieces:
            inside = np.all((p >= b.lower) & (p < b.upper), axis=1)
            out = np.where(inside, v, out)
        return out

    return TargetFunction(f, window, label)


def level(values, n, k):
    """``n + floor((v - n) 2^k) / 2^k`` capped at ``n + k``; 0 below n."""
    v = np.asarray(values, dtype=float)
    with np.errstate(invalid="ignore"):
        q = n + np.floor(np.minimum(v - n, k) * 2.0 ** k) / 2.0 ** k
    return np.where(v >= n, np.minimum(q, n + k), 0.0)


@dataclass(frozen=True, eq=False)
class SimpleFunction:
    k: int
    n: int
    terms: tuple
    target: TargetFunction = field(repr=False)

    def __call__(self, points):
        return level(self.target.tilde(points), self.n, self.k)

    @property
    def values(self):
        return tuple(v for v, _ in self.terms)


def simple_stage(f, k, probe=256):
    """Stage-k simple function below ``f̃``; levels are found on a probe lattice."""
    if k < 1:
        raise ContractViolation("stage index must be at least 1")
    n = f.n
    grid = rasterize(ImplicitRegion(n, lambda p: np.ones(len(p), dtype=bool), f.window), f.window.sides / probe, f.window)
    axes = [grid.origin[i] + (np.arange(grid.shape[i]) + 0.5) * grid.spacing[i] for i in range(n)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    lv = level(f.tilde(pts), n, k)
    terms = []
    for a in np.unique(lv[lv > 0]):
        def member(p, a=a):
            return level(f.tilde(p), n, k) == a
        terms.append((float(a), ImplicitRegion(n, member, f.window, f"s{k}={a:g}")))
    return SimpleFunction(k, n, tuple(terms), f)


@dataclass(frozen=True)
class DyadicBox:
    """A closed box with integer corners in units of ``2^-unit``."""

    lower: tuple
    upper: tuple
    unit: int

    @property
    def box(self):
        s = 2.0 ** -self.unit
        return Box(tuple(v * s for v in self.lower), tuple(v * s for v in self.upper))

    @property
    def volume_exact(self):
        return math.prod(Fraction(b - a, 2 ** self.unit) for a, b in zip(self.lower, self.upper))

    def disjoint(self, other):
        if self.unit != other.unit:
            raise ContractViolation("compare boxes in a common unit")
        return any(self.upper[i] < other.lower[i] or other.upper[i] < self.lower[i]
                   for i in range(len(self.lower)))


@dataclass(frozen=True, eq=False)
class RectanglePartition:
    k: int
    n: int
    rectangles: tuple
    values: tuple
    epsilon: float
    ledger: dict = field(default_factory=dict)

    @property
    def count(self):
        return len(self.rectangles)

    def boxes(self):
        return [r.box for r in self.rectangles]


def _grid_cells(window, k):
    """Integer index ranges of the side-``2^-k`` dyadic cells inside the window."""
    s = 2.0 ** k
    lo = np.ceil(np.asarray(window.lower) * s - 1e-9).astype(np.int64)
    hi = np.floor(np.asarray(window.upper) * s + 1e-9).astype(np.int64)
    return lo, hi


def rectangle_stage(s, k, window=None, occupancy_probe=4, max_cells=1 << 22):
    """Maximal dyadic squares on which ``s`` is a constant positive level."""
    window = window or s.target.window
    n = s.n
    if not s.terms:
        return RectanglePartition(k, n, (), (), 1.0 / (2 * k), {"support": 0.0, "covered": 0.0})
    lo, hi = _grid_cells(window, k)
    counts = hi - lo
    if np.any(counts <= 0):
        raise ContractViolation("window holds no dyadic cell at this stage")
    if int(np.prod(counts)) > max_cells:
        raise ContractViolation(f"stage {k} needs {int(np.prod(counts))} cells; budget {max_cells}")
    h = 2.0 ** -k
    sub = (np.arange(occupancy_probe) + 0.5) / occupancy_probe
    offs = np.stack([g.ravel() for g in np.meshgrid(*([sub] * n), indexing="ij")], axis=1) * h
    idx = np.stack([g.ravel() for g in np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")], axis=1)
    corners = (idx + lo) * h
    vals = s((corners[:, None, :] + offs[None, :, :]).reshape(-1, n)).reshape(len(idx), -1)
    full = np.all(vals == vals[:, :1], axis=1) & (vals[:, 0] > 0)
    cell_val = np.where(full, vals[:, 0], 0.0).reshape(tuple(counts))
    partial_cells = int(np.count_nonzero(np.any(vals > 0, axis=1) & ~full))

    # quadtree merge: coarsest aligned squares first
    taken = np.zeros(tuple(counts), dtype=bool)
    rects, values = [], []
    unit = k + GAP_EXTRA
    for j in range(0, k + 1):
        step = 2 ** (k - j)
        a = -(-lo // step) * step
        b = (hi // step) * step
        if np.any(b <= a):
            continue
        for corner in np.stack([g.ravel() for g in np.meshgrid(*[np.arange(a[i], b[i], step) for i in range(n)],
                                                                 indexing="ij")], axis=1):
            sl = tuple(slice(int(c - l), int(c - l + step)) for c, l in zip(corner, lo))
            block = cell_val[sl]
            if taken[sl].any() or block.flat[0] <= 0 or not np.all(block == block.flat[0]):
                continue
            taken[sl] = True
            scale = 2 ** GAP_EXTRA
            lower = tuple(int(c) * scale + 1 for c in corner)
            upper = tuple((int(c) + step) * scale - 1 for c in corner)
            rects.append(DyadicBox(lower, upper, unit))
            values.append(float(block.flat[0]) + 1.0 / k)
    eps = 1.0 / (2 * k)
    for v in values:
        if not v - eps > n:
            raise ContractViolation("rectangle value too close to n")
    cell_vol = h ** n
    covered = float(sum(r.volume_exact for r in rects))
    support = float(np.count_nonzero(cell_val > 0)) * cell_vol
    ledger = {
        "support_full_cells": support,
        "partial_cells": partial_cells * cell_vol,
        "covered": covered,
        "gap": support - covered,
    }
    return RectanglePartition(k, n, tuple(rects), tuple(values), eps, ledger)


@dataclass(frozen=True, eq=False)
class StageSet:
    """``F_k``: a union of per-rectangle constructions, with an exact residual hook."""

    partition: RectanglePartition
    engines: tuple
    kinds: tuple
    budget: float
    skipped: tuple = ()

    @property
    def n(self):
        return self.partition.n

    def removed(self, points):
        out = np.zeros(len(points), dtype=bool)
        for eng in self.engines:
            inside = eng.window.contains(points)
            if inside.any():
                out[inside] |= eng.removed(points[inside])
        return out

    def member(self, points):
        out = np.zeros(len(points), dtype=bool)
        for eng in self.engines:
            out |= eng.window.contains(points)
        if out.any():
            idx = np.nonzero(out)[0]
            out[idx] &= ~self.removed(points[idx])
        return out

    def residual(self, center, r):
        c = np.asarray(center, dtype=float)
        total = float(ball_volume(self.n, r))
        err = 0.0
        for eng in self.engines:
            w = eng.window
            if np.any(c + r < w.lower) or np.any(c - r > w.upper):
                continue
            inside = eng._ball_window_volume(c, r)
            if inside <= 0:
                continue
            rem, e = eng.removed_in_ball(c, r)
            total -= inside - rem
            err += e
        return max(total, 0.0), err

    def region(self):
        def hook(center, radius, quad):
            return self.residual(center, radius)
        if not self.engines:
            raise ContractViolation("an empty partition has no region")
        bbox = self.engines[0].window
        for e in self.engines[1:]:
            bbox = bbox.hull(e.window)
        return ImplicitRegion(self.n, self.member, bbox, f"F_{self.partition.k}", None, hook)

    def boundary_distance(self, points):
        """Distance to the nearest rectangle boundary (inf without rectangles)."""
        d = np.full(len(points), np.inf)
        for eng in self.engines:
            lo, hi = np.asarray(eng.window.lower), np.asarray(eng.window.upper)
            inside = np.all((points >= lo) & (points <= hi), axis=1)
            gap_in = np.min(np.minimum(points - lo, hi - points), axis=1)
            out = np.sqrt(np.sum(np.maximum(np.maximum(lo - points, points - hi), 0.0) ** 2, axis=1))
            d = np.minimum(d, np.where(inside, gap_in, out))
        return d

    def covers(self, points):
        out = np.zeros(len(points), dtype=bool)
        for eng in self.engines:
            out |= eng.window.contains(points)
        return out

    def report(self):
        rows = []
        for eng, kind, v in zip(self.engines, self.kinds, self.partition.values):
            measure, lower = eng.achieved_measure()
            rows.append({"kind": kind, "target": v, "volume": eng.window.volume,
                         "removed_bound": eng.removed_volume_bound(), "budget": self.budget,
                         "achieved_measure": measure, "measure_lower_bound": lower})
        return rows


def synthesize_F_k(p, seed=0, v0=0.01, graded_generations=30, swiss_generations=40):
    """Per-rectangle closed sets; removed volume per rectangle below ``0.5 2^-k / N_k``."""
    n, k = p.n, p.k
    if p.count == 0:
        return StageSet(p, (), (), 0.0)
    budget = 0.5 * 2.0 ** -k / p.count
    shift = _shift(n, seed)
    engines, kinds = [], []
    for rect, b in zip(p.rectangles, p.values):
        box = rect.box
        vol = box.volume
        if b <= n + 1.0 / k + 1e-12:
            fr = swiss_fractions(n, swiss_generations, budget / vol)
            kinds.append("swiss_cheese")
        else:
            base = graded_fractions(b, n, graded_generations, 1.0)
            scale = min(v0, budget / (vol * sum(base)))
            fr = tuple(scale * f for f in base)
            kinds.append("graded_removal")
        engines.append(DyadicRemoval(box, fr, shift, f"F_{k}[{len(engines)}]"))
    return StageSet(p, tuple(engines), tuple(kinds), budget)


@dataclass(frozen=True, eq=False)
class Stage:
    k: int
    simple: SimpleFunction
    partition: RectanglePartition
    F: StageSet

    def budget_ledger(self):
        """Skipped and removed measure against ``2 * 2^-k`` times the window volume."""
        removed = sum(e.removed_volume_bound() for e in self.F.engines)
        lost = self.partition.ledger.get("gap", 0.0) + self.partition.ledger.get("partial_cells", 0.0)
        return {"k": self.k, "rectangles": self.partition.count, "gap": self.partition.ledger.get("gap", 0.0),
                "partial_cells": self.partition.ledger.get("partial_cells", 0.0),
                "removed_bound": removed, "total": lost + removed}


def run_pipeline(f, stages, seed=0, **kw):
    out = []
    for k in stages:
        s = simple_stage(f, k)
        p = rectangle_stage(s, k, f.window)
        out.append(Stage(k, s, p, synthesize_F_k(p, seed=seed, **kw)))
    return out


def pipeline_ladder():
    """Ladder used for pipeline estimates: wide log range, five rungs."""
    return RadiusLadder(2.0 ** -6, 0.125, 5)


# ---------------------------------------------------------------- convergence

def _error(est, target):
    if target == 0:
        return 0.0 if est.cls == ZERO else math.inf
    if math.isinf(target):
        return 0.0 if est.cls == INFINITE else math.inf
    if est.cls != FINITE:
        return math.inf
    return abs(est.exponent - target)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    stages: tuple
    samples: np.ndarray
    targets: np.ndarray
    excluded: np.ndarray
    errors: np.ndarray
    estimates: tuple
    tolerance: float
    max_excluded: float = 0.2

    @property
    def retained(self):
        return ~self.excluded

    @property
    def excluded_fraction(self):
        return float(np.mean(self.excluded)) if len(self.excluded) else 0.0

    @property
    def medians(self):
        e = self.errors[self.retained]
        if e.size == 0:
            return tuple(math.nan for _ in self.stages)
        return tuple(float(np.median(e[:, j])) for j in range(len(self.stages)))

    def medians_by_target(self):
        out = {}
        t = self.targets[self.retained]
        e = self.errors[self.retained]
        for v in np.unique(t):
            out[float(v)] = tuple(float(np.median(e[t == v, j])) for j in range(len(self.stages)))
        return out

    @property
    def valid(self):
        return self.excluded_fraction <= self.max_excluded

    @property
    def nonincreasing(self):
        m = self.medians
        return all(b <= a for a, b in zip(m, m[1:]))

    @property
    def passed(self):
        return self.valid and self.nonincreasing and self.medians[-1] <= self.tolerance

    def to_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        n = self.samples.shape[1]
        w.writerow([f"x_{i + 1}" for i in range(n)] + ["target", "excluded"] +
                   [f"d_F{k}" for k in self.stages])
        for x, t, ex, ests in zip(self.samples, self.targets, self.excluded, self.estimates):
            cells = []
            for est in ests:
                if est is None:
                    cells.append("")
                elif est.cls == FINITE:
                    cells.append(f"{est.exponent:.10g}")
                else:
                    cells.append(est.cls)
            w.writerow([f"{v:.10g}" for v in x] + [f"{t:.10g}", int(ex)] + cells)
        return out.getvalue()


def convergence_report(f, stages, samples, ladder=None, q=None, tolerance=0.25, collar=None,
                       config=DEFAULT_ESTIMATOR):
    """Per-sample trajectories ``k -> |d̂_{F_k}(x) − f(x)|``.

    Samples in a removed ball of any stage, within ``collar`` (default the top
    ladder radius) of a rectangle boundary, or in the target's support but
    outside the last stage's rectangles, are excluded.
    """
    if len(stages) < 3:
        raise ContractViolation("need at least three stages")
    ladder = ladder or pipeline_ladder()
    collar = ladder.r0 if collar is None else collar
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    targets = f.tilde(pts) if len(pts) else np.zeros(0)
    excluded = np.zeros(len(pts), dtype=bool)
    for st in stages:
        if len(pts):
            excluded |= st.F.removed(pts)
            excluded |= st.F.boundary_distance(pts) < collar
    if len(pts):
        excluded |= (targets > 0) & ~stages[-1].F.covers(pts)
    regions = [st.F.region() if st.F.engines else None for st in stages]
    errors = np.zeros((len(pts), len(stages)))
    estimates = []
    for i, x in enumerate(pts):
        row = []
        for j, R in enumerate(regions):
            if excluded[i]:
                row.append(None)
                errors[i, j] = math.nan
                continue
            if R is None:
                est = DegreeEstimate(tuple(x), ZERO, None, 0.0, 0, (), ("empty_set",))
            else:
                est = estimate_degree(R, x, ladder, q, config)
            row.append(est)
            errors[i, j] = _error(est, targets[i])
        estimates.append(tuple(row))
    return ConvergenceReport(tuple(st.k for st in stages), pts, targets, excluded, errors,
                             tuple(estimates), tolerance)


# ---------------------------------------------------------------- increasing family

@dataclass(frozen=True, eq=False)
class FamilyMember:
    l: int
    region: ImplicitRegion
    measure: float


def increasing_family(E, stages, window=None, seed=0, spacing=2.0 ** -10):
    """``F_l = ∩_{k >= l} F̃_k`` for the stage sets of the pipeline run on ``n χ_E``.

    Returns the members (with grid measures) and the stage list.
    """
    window = window or E.bbox
    n = E.dimension
    f = TargetFunction(lambda p: np.where(E.contains(p), float(n), 0.0), window, "n*chi_E")
    runs = run_pipeline(f, stages, seed=seed)
    members = []
    for i, st in enumerate(runs):
        later = [r.F for r in runs[i:]]

        def member(p, later=later):
            out = np.ones(len(p), dtype=bool)
            for F in later:
                if not out.any():
                    break
                idx = np.nonzero(out)[0]
                out[idx] = F.member(p[idx])
            return out

        R = ImplicitRegion(n, member, window, f"F_{st.k}")
        members.append(FamilyMember(st.k, R, rasterize(R, spacing, window).measure()))
    return members, runs


# ---------------------------------------------------------------- impossibility

@dataclass(frozen=True)
class ImpossibilityReport:
    m: float
    exponents: tuple
    histogram: tuple
    edges: tuple
    vacuous: bool
    precondition_ok: bool
    narrative: str

    @property
    def max_exponent(self):
        return max(self.exponents) if self.exponents else math.nan


def impossibility_demo(m, F, samples, ladder=None, q=None, bins=10, config=DEFAULT_ESTIMATOR):
    """Contrast a requested degree m with the observed degrees of F.

    A set E with ``d_E = m χ_F`` a.e. would satisfy ``E ~ F`` (both are the
    support of its nonzero degrees, up to null sets). Equivalent sets have the
    same density points of every order, so ``d_E = d_F`` a.e. on F, and the
    observed degrees of F stay below m.
    """
    ladder = ladder or pipeline_ladder()
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    inside = F.contains(pts) if len(pts) else np.zeros(0, dtype=bool)
    ex = []
    for x in pts[inside]:
        est = estimate_degree(F, x, ladder, q, config)
        if est.cls == FINITE:
            ex.append(float(est.exponent))
    if not ex:
        return ImpossibilityReport(float(m), (), (), (), True, False,
                                   "F has no sampled points of finite degree; the demonstration is vacuous.")
    hist, edges = np.histogram(ex, bins=bins)
    mx = max(ex)
    ok = m > mx
    if ok:
        text = (f"Requested degree m = {m:g} exceeds every observed degree of F (max {mx:.3f}).\n"
                f"Suppose d_E = m chi_F almost everywhere. Then E and F agree up to a null set.\n"
                f"Null perturbations leave every m-density set unchanged, so d_E = d_F a.e. on F.\n"
                f"On F the observed degrees stay at or below {mx:.3f} < {m:g}: contradiction.")
    else:
        text = (f"Precondition violated: m = {m:g} does not exceed the observed maximum degree {mx:.3f}.")
    return ImpossibilityReport(float(m), tuple(ex), tuple(int(v) for v in hist), tuple(float(v) for v in edges),
                               False, ok, text)
