"""Canonical sets and constructions with known or targeted density behavior."""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import intervals as iv
from .geometry import (ball_intersection_volume, ball_volume, cap_volume,
                       disc_box_area, unit_ball_volume)
from .measure_core import Box, ContractViolation, ImplicitRegion


# ---------------------------------------------------------------- simple specimens

def make_cusp(m):
    """``{|x2| > |x1|^(m-1)}`` inside ``[-1, 1]^2``; its degree at 0 is m."""
    if not m > 2:
        raise ContractViolation(f"cusp exponent must exceed 2, got {m}")
    m = float(m)
    box = Box((-1.0, -1.0), (1.0, 1.0))

    def member(p):
        return (np.abs(p[:, 1]) > np.abs(p[:, 0]) ** (m - 1)) & box.contains(p)

    def sections(prefix):
        x1 = prefix[:, 0]
        a = np.abs(x1) ** (m - 1)
        ok = (np.abs(x1) <= 1.0) & (a < 1.0)
        lo = np.where(ok[:, None], [[-1.0, 0.0]], np.inf)
        hi = np.where(ok[:, None], [[0.0, 1.0]], np.inf)
        lo[:, 1] = np.where(ok, a, np.inf)
        hi[:, 0] = np.where(ok, -a, np.inf)
        return iv.normalize(lo, hi)

    return ImplicitRegion(2, member, box, f"cusp(m={m:g})", sections)


def _universe(n, half_width=8.0):
    return Box.cube(n, half_width)


def make_half_space(normal, offset=0.0, universe=None):
    """The open half-space ``{x : <normal, x> < offset}``, clipped to ``universe``."""
    normal = np.asarray(normal, dtype=float)
    norm = float(np.linalg.norm(normal))
    if norm == 0:
        raise ContractViolation("half-space normal must be nonzero")
    n = normal.size
    box = universe or _universe(n)
    u, d0 = normal / norm, float(offset) / norm

    def member(p):
        return (p @ u < d0) & box.contains(p)

    def hook(center, radius, quad):
        if not box.contains_ball(center, radius):
            return None
        return float(cap_volume(n, radius, d0 - float(np.dot(u, center)))), 0.0

    sections = None
    if n <= 2:
        def sections(prefix):
            rows = len(prefix)
            lo, hi = np.full(rows, box.lower[-1]), np.full(rows, box.upper[-1])
            inside = np.all((prefix >= box.lower[:-1]) & (prefix <= box.upper[:-1]), axis=1)
            rest = prefix @ u[:-1] if n > 1 else np.zeros(rows)
            un = u[-1]
            if un > 0:
                hi = np.minimum(hi, (d0 - rest) / un)
            elif un < 0:
                lo = np.maximum(lo, (d0 - rest) / un)
            else:
                inside &= rest < d0
            return iv.single(np.where(inside, lo, np.inf), np.where(inside, hi, np.inf))

    return ImplicitRegion(n, member, box, f"halfspace({tuple(normal)}, {offset:g})", sections, hook)


def make_ball(center, radius):
    """The open ball ``B(center, radius)``."""
    c = np.asarray(center, dtype=float)
    n = c.size
    if not radius > 0:
        raise ContractViolation("ball radius must be positive")
    r = float(radius)

    def member(p):
        return np.sum((p - c) ** 2, axis=1) < r * r

    def hook(center, rad, quad):
        inter = ball_intersection_volume(n, np.asarray(center, dtype=float), rad, c, r)[0]
        return float(ball_volume(n, rad)) - float(inter), 0.0

    sections = None
    if n <= 2:
        def sections(prefix):
            s2 = r * r - np.sum((prefix - c[:-1]) ** 2, axis=1)
            half = np.sqrt(np.maximum(s2, 0.0))
            ok = s2 > 0
            return iv.single(np.where(ok, c[-1] - half, np.inf), np.where(ok, c[-1] + half, np.inf))

    return ImplicitRegion(n, member, Box(c - r, c + r), f"ball({tuple(c)}, {r:g})", sections, hook)


def make_rectangle(box):
    """The closed box."""
    if not isinstance(box, Box):
        box = Box(*box)
    n = box.dimension

    def member(p):
        return box.contains(p)

    hook = None
    sections = None
    if n <= 2:
        def hook(center, rad, quad):
            return float(ball_volume(n, rad)) - disc_box_area(center, rad, box.lower, box.upper), 0.0

        def sections(prefix):
            inside = np.all((prefix >= box.lower[:-1]) & (prefix <= box.upper[:-1]), axis=1)
            return iv.single(np.where(inside, box.lower[-1], np.inf),
                             np.where(inside, box.upper[-1], np.inf))

    return ImplicitRegion(n, member, box, f"rect({box.lower}, {box.upper})", sections, hook)


def make_punctured_ball(center, radius):
    """``B(center, radius) \\ {center}``."""
    B = make_ball(center, radius)
    c = np.asarray(center, dtype=float)

    def member(p):
        return B.membership(p) & np.any(p != c, axis=1)

    return ImplicitRegion(B.dimension, member, B.bbox, f"punctured {B.label}",
                          B.sections, B.residual_hook)


# ---------------------------------------------------------------- fat Cantor sets

@dataclass(frozen=True, eq=False)
class FatCantorSet:
    """Depth-K truncation of the middle-removal construction on ``[a, a + length]``.

    At stage k every surviving interval loses its open middle part of relative
    length ``removal_fractions[k-1]``.
    """

    removal_fractions: tuple
    depth: int
    start: float = 0.0
    length: float = 1.0
    lo: np.ndarray = field(init=False, repr=False)
    hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.removal_fractions)
        if self.depth < 0 or len(deltas) < self.depth:
            raise ContractViolation("need one removal fraction per stage")
        deltas = deltas[: self.depth]
        if any(not 0 < d < 1 for d in deltas) or sum(deltas) >= 1:
            raise ContractViolation("removal fractions must lie in (0, 1) and sum below 1")
        lo = np.array([self.start])
        width = self.length
        for d in deltas:
            keep = width * (1 - d) / 2
            lo = np.concatenate([lo, lo + width - keep]).reshape(2, -1).T.ravel()
            width = keep
        object.__setattr__(self, "removal_fractions", deltas)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", lo + width)

    @property
    def measure(self):
        return self.length * math.prod(1 - d for d in self.removal_fractions)

    @property
    def piece_length(self):
        return float(self.hi[0] - self.lo[0])

    def contains(self, t):
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self.lo, t, side="right") - 1
        jj = np.clip(j, 0, len(self.lo) - 1)
        return (j >= 0) & (t <= self.hi[jj])

    def nearest(self, t):
        """Closest point of the truncated set to each ``t``."""
        t = np.asarray(t, dtype=float)
        j = np.clip(np.searchsorted(self.lo, t, side="right") - 1, 0, len(self.lo) - 1)
        k = np.clip(j + 1, 0, len(self.lo) - 1)
        a = np.clip(t, self.lo[j], self.hi[j])
        b = np.clip(t, self.lo[k], self.hi[k])
        return np.where(np.abs(t - a) <= np.abs(t - b), a, b)

    def distance(self, t):
        """Distance from each ``t`` to the closed truncated set."""
        t = np.asarray(t, dtype=float)
        return np.abs(t - self.nearest(t))

    def intervals(self, rows=1):
        return (np.broadcast_to(self.lo, (rows, len(self.lo))).copy(),
                np.broadcast_to(self.hi, (rows, len(self.hi))).copy())


def make_fat_cantor(removal_fractions, depth, height=None, start=0.0, length=1.0):
    """The 1-D truncated fat Cantor set, or its product with ``[-height, height]``.

    Returns ``(region, cantor)`` so callers keep the interval table.
    """
    C = FatCantorSet(tuple(removal_fractions), depth, start, length)
    if height is None:
        def member(p):
            return C.contains(p[:, 0])

        def sections(prefix):
            return C.intervals(len(prefix))

        box = Box((C.start,), (C.start + C.length,))
        return ImplicitRegion(1, member, box, f"fatcantor(depth={depth})", sections), C

    h = float(height)

    def member(p):
        return C.contains(p[:, 0]) & (np.abs(p[:, 1]) <= h)

    def sections(prefix):
        ok = C.contains(prefix[:, 0])
        return iv.single(np.where(ok, -h, np.inf), np.where(ok, h, np.inf))

    box = Box((C.start, -h), (C.start + C.length, h))
    return ImplicitRegion(2, member, box, f"fatcantor(depth={depth}) x [-{h:g}, {h:g}]", sections), C


def geometric_fractions(depth, base=4.0):
    """``delta_k = base^-k``, the standard summable choice."""
    return tuple(base ** -(k + 1) for k in range(depth))


# ---------------------------------------------------------------- perimeter

def _segments_cross(p, q, r, s):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2, o3, o4 = orient(p, q, r), orient(p, q, s), orient(r, s, p), orient(r, s, q)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p, q, r)) or (o2 == 0 and on_seg(p, q, s))
            or (o3 == 0 and on_seg(r, s, p)) or (o4 == 0 and on_seg(r, s, q)))


def perimeter_polygon(vertices):
    """Edge-length sum of a simple closed polygon."""
    v = [tuple(map(float, p)) for p in vertices]
    k = len(v)
    if k < 3:
        raise ContractViolation("a polygon needs at least three vertices")
    edges = [(v[i], v[(i + 1) % k]) for i in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            if j == i + 1 or (i == 0 and j == k - 1):
                continue
            if _segments_cross(*edges[i], *edges[j]):
                raise ContractViolation(f"polygon edges {i} and {j} intersect")
    return float(sum(math.dist(a, b) for a, b in edges))


def perimeter_disc(r):
    if not r > 0:
        raise ContractViolation("radius must be positive")
    return 2.0 * math.pi * r


# ---------------------------------------------------------------- dyadic removal

@dataclass(frozen=True, eq=False)
class DyadicRemoval:
    """A closed window minus open balls placed at dyadic cell centres.

    Generation g uses cells of side ``h_g = 2^-g`` on a grid shifted by a
    fixed seeded vector, so grids of all generations nest. The ball of a cell
    has radius ``(f_g / omega_n)^(1/n) h_g``, which removes a fraction
    ``f_g`` of the cell. A ball is kept when it lies inside the window and its
    closure misses every in-window ball of the enclosing coarser cells; kept
    balls are therefore pairwise disjoint.
    """

    window: Box
    fractions: tuple
    shift: tuple
    label: str = "removal"
    exact_depth: int = 6
    radii: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.window.dimension
        f = np.asarray(self.fractions, dtype=float)
        if f.size < 1:
            raise ContractViolation("need at least one generation")
        omega = unit_ball_volume(n)
        h = 2.0 ** -np.arange(1, f.size + 1)
        radii = (f / omega) ** (1.0 / n) * h
        if np.any(radii >= h / 4):
            g = int(np.argmax(radii >= h / 4)) + 1
            raise ContractViolation(f"generation {g} radius {radii[g - 1]:.3g} is not below h/4 = {h[g - 1] / 4:.3g}")
        object.__setattr__(self, "fractions", tuple(float(v) for v in f))
        object.__setattr__(self, "shift", tuple(float(v) for v in self.shift))
        object.__setattr__(self, "radii", radii)

    @property
    def n(self):
        return self.window.dimension

    @property
    def generations(self):
        return len(self.fractions)

    def spacing(self, g):
        return 2.0 ** -g

    def _centers(self, points, g):
        s = np.asarray(self.shift)
        h = self.spacing(g)
        return s + h * (np.floor((points - s) / h) + 0.5)

    def _in_window(self, centers, g):
        rho = self.radii[g - 1]
        lo, hi = np.asarray(self.window.lower), np.asarray(self.window.upper)
        return np.all((centers - rho >= lo) & (centers + rho <= hi), axis=1)

    def kept(self, centers, g):
        """Keep flags for generation-g candidate centres."""
        ok = self._in_window(centers, g)
        rho = self.radii[g - 1]
        for gp in range(1, g):
            if not ok.any():
                break
            anc = self._centers(centers, gp)
            clash = self._in_window(anc, gp) & (
                np.sum((centers - anc) ** 2, axis=1) <= (rho + self.radii[gp - 1]) ** 2)
            ok &= ~clash
        return ok

    def removed(self, points):
        """True where a point lies in a kept ball."""
        out = np.zeros(len(points), dtype=bool)
        for g in range(1, self.generations + 1):
            c = self._centers(points, g)
            hit = np.sum((points - c) ** 2, axis=1) < self.radii[g - 1] ** 2
            hit &= ~out
            if hit.any():
                idx = np.nonzero(hit)[0]
                out[idx[self.kept(c[idx], g)]] = True
        return out

    def member(self, points):
        return self.window.contains(points) & ~self.removed(points)

    def _cells_in(self, lo, hi, g):
        s = np.asarray(self.shift)
        h = self.spacing(g)
        a = np.floor((lo - s) / h).astype(np.int64)
        b = np.floor((hi - s) / h).astype(np.int64)
        if np.any(b < a):
            return np.zeros((0, self.n))
        axes = [np.arange(a[i], b[i] + 1) for i in range(self.n)]
        grid = np.meshgrid(*axes, indexing="ij")
        idx = np.stack([x.ravel() for x in grid], axis=1)
        return s + h * (idx + 0.5)

    def removed_in_ball(self, center, r):
        """``(volume, error)`` of the kept balls inside ``B(center, r)``.

        Generations with at most ``2^exact_depth`` cells across the ball are
        summed exactly; finer ones use their mean removed fraction of the
        part of the ball not already removed.
        """
        c = np.asarray(center, dtype=float)
        lo = np.maximum(c - r, self.window.lower)
        hi = np.minimum(c + r, self.window.upper)
        if np.any(hi <= lo):
            return 0.0, 0.0
        exact, err, deep = 0.0, 0.0, []
        for g in range(1, self.generations + 1):
            h, rho = self.spacing(g), self.radii[g - 1]
            if 2 * r / h > 2 ** self.exact_depth:
                deep.append(g)
                continue
            cand = self._cells_in(lo - rho, hi + rho, g)
            if len(cand) == 0:
                continue
            near = np.sum((cand - c) ** 2, axis=1) < (r + rho) ** 2
            cand = cand[near]
            if len(cand) == 0:
                continue
            cand = cand[self.kept(cand, g)]
            if len(cand):
                exact += float(np.sum(ball_intersection_volume(self.n, c, r, cand, np.full(len(cand), rho))))
        if deep:
            inside = self._ball_window_volume(c, r)
            free = max(inside - exact, 0.0)
            omega = unit_ball_volume(self.n)
            for g in deep:
                f = self.fractions[g - 1]
                share = f * free
                exact += share
                cells = inside / self.spacing(g) ** self.n
                boundary = max(cells ** ((self.n - 1) / self.n), 1.0)
                err += omega * self.radii[g - 1] ** self.n * math.sqrt(boundary)
                free -= share
        return exact, err

    def _ball_window_volume(self, c, r):
        if self.n <= 2:
            return disc_box_area(c, r, self.window.lower, self.window.upper)
        if self.window.contains_ball(c, r):
            return float(ball_volume(self.n, r))
        raise ContractViolation("ball-window overlap only implemented for n <= 2 or contained balls")

    def residual(self, center, r):
        """``(L^n(B(center, r) \\ F), error)``."""
        c = np.asarray(center, dtype=float)
        outside = float(ball_volume(self.n, r)) - self._ball_window_volume(c, r)
        rem, err = self.removed_in_ball(c, r)
        return outside + rem, err

    def removed_volume_bound(self):
        """Upper bound on the total removed volume: sum of ``f_g`` times the window volume."""
        return float(sum(self.fractions)) * self.window.volume

    def achieved_measure(self, exact_generations=None):
        """Window volume minus removed volume; exact up to ``exact_generations``,
        mean-field beyond. Returns ``(measure, lower_bound)``."""
        vol = self.window.volume
        limit = exact_generations
        if limit is None:
            limit = 0
            for g in range(1, self.generations + 1):
                if vol / self.spacing(g) ** self.n > 2e5:
                    break
                limit = g
        removed = 0.0
        omega = unit_ball_volume(self.n)
        for g in range(1, limit + 1):
            cand = self._cells_in(np.asarray(self.window.lower), np.asarray(self.window.upper), g)
            if len(cand):
                removed += int(np.count_nonzero(self.kept(cand, g))) * omega * self.radii[g - 1] ** self.n
        free = vol - removed
        for g in range(limit + 1, self.generations + 1):
            share = self.fractions[g - 1] * free
            removed += share
            free -= share
        return vol - removed, vol - self.removed_volume_bound()

    def expected_residual(self, r):
        """Heuristic mean-field residual ``sum_g f_g * omega r^n`` over generations with ``h_g <= r``
        plus the proportional part of coarser generations."""
        vol = float(ball_volume(self.n, r))
        total = 0.0
        for g in range(1, self.generations + 1):
            if self.spacing(g) <= 2 * r:
                total += self.fractions[g - 1] * vol
        return total

    def region(self):
        def hook(center, radius, quad):
            return self.residual(center, radius)
        return ImplicitRegion(self.n, self.member, self.window, self.label, None, hook)


def _shift(n, seed):
    return tuple(np.random.default_rng(seed).uniform(0.0, 1.0, size=n))


DEFAULT_GRADED_GENERATIONS = 30
DEFAULT_SWISS_GENERATIONS = 40


def graded_fractions(t, n, G, v0=0.01):
    return tuple(v0 * 2.0 ** (-g * (t - n)) for g in range(1, G + 1))


def make_graded_removal(t, G=DEFAULT_GRADED_GENERATIONS, window=None, v0=0.01, seed=0, engine=False):
    """Window minus dyadic ball families with removed fraction ``v0 * 2^(-g(t-n))``
    at generation g; sampled degrees target t."""
    window = window or Box((0.0, 0.0), (1.0, 1.0))
    n = window.dimension
    if not t > n:
        raise ContractViolation(f"target degree must exceed n = {n}, got {t}")
    if G < 6:
        raise ContractViolation("graded removal needs at least 6 generations")
    eng = DyadicRemoval(window, graded_fractions(t, n, G, v0), _shift(n, seed), f"graded(t={t:g})")
    return eng if engine else eng.region()


def swiss_fractions(n, G, budget_fraction):
    """``a / g^2`` with ``a`` matching the budget and capped below the ``h/4`` radius limit."""
    zeta = sum(1.0 / g ** 2 for g in range(1, G + 1))
    cap = 0.9 * unit_ball_volume(n) / 4 ** n
    a = min(budget_fraction / zeta, cap)
    return tuple(a / g ** 2 for g in range(1, G + 1))


def make_swiss_cheese(window, budget, seed=0, G=DEFAULT_SWISS_GENERATIONS, engine=False):
    """Closed window minus dyadic balls whose total volume stays below ``budget``.

    Removed fractions decay like ``1/g^2``, so the residual in ``B(x, r)`` is of
    order ``r^n / log(1/r)``: every retained point has degree n.
    """
    vol = window.volume
    if not 0 < budget < vol:
        raise ContractViolation(f"budget must lie in (0, {vol:g}), got {budget}")
    eng = DyadicRemoval(window, swiss_fractions(window.dimension, G, budget / vol),
                        _shift(window.dimension, seed), "swiss-cheese")
    measure, lower = eng.achieved_measure()
    if lower <= vol - budget - 1e-12 * vol:
        raise ContractViolation(f"budget infeasible: achieved measure {measure:g}")
    return eng if engine else eng.region()


# ---------------------------------------------------------------- manifest

def load_manifest():
    """The bundled gallery manifest as a ``ConfigParser``."""
    cp = configparser.ConfigParser()
    cp.read_string(resources.files(__package__).joinpath("gallery.ini").read_text())
    return cp


def build(name, **overrides):
    """Construct a manifest entry by name, with keyword overrides of its parameters."""
    cp = load_manifest()
    if name not in cp:
        raise KeyError(name)
    sec = dict(cp[name])
    sec.update({k: str(v) for k, v in overrides.items()})
    kind = sec["kind"]
    num = lambda key, default=None: float(sec.get(key, default))
    if kind == "cusp":
        return make_cusp(num("m"))
    if kind == "half_space":
        return make_half_space((num("normal_x"), num("normal_y")), num("offset", 0.0))
    if kind == "ball":
        return make_ball((num("center_x"), num("center_y")), num("radius"))
    if kind == "punctured_ball":
        return make_punctured_ball((num("center_x"), num("center_y")), num("radius"))
    if kind == "rectangle":
        return make_rectangle(Box((num("lower_x"), num("lower_y")), (num("upper_x"), num("upper_y"))))
    if kind == "graded_removal":
        return make_graded_removal(num("t"), int(num("generations", DEFAULT_GRADED_GENERATIONS)),
                                   seed=int(num("seed", 0)))
    if kind == "swiss_cheese":
        return make_swiss_cheese(Box((0.0, 0.0), (1.0, 1.0)), num("budget"), seed=int(num("seed", 0)))
    if kind == "fat_cantor":
        depth = int(num("depth"))
        return make_fat_cantor(geometric_fractions(depth, num("base", 4.0)), depth)[0]
    raise ContractViolation(f"unknown gallery kind {kind!r}")
