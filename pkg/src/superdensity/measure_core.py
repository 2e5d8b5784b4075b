"""Set representations, set algebra and the Lebesgue-measure oracle.

Every set is an :class:`ImplicitRegion`: a vectorized membership predicate
plus a bounding box. Two optional accelerators make small-radius measurements
tractable:

``sections``
    For a batch of points ``p`` in R^{n-1}, the membership set of the line
    ``{(p, t)}`` as a batch of intervals (see :mod:`superdensity.intervals`).
    Sections compose under the whole region algebra, and in n <= 2 they turn
    every ball measurement into a one-dimensional integral.
``residual_hook``
    ``hook(center, radius, quad) -> (value, error)`` or ``None``; a
    closed-form or semi-analytic value of ``L^n(B \\ E)``.

Without either, :func:`residual_measure` falls back to a point lattice over
the ball.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import intervals as iv
from .geometry import ball_volume, unit_ball_volume

DEFAULT_UNIVERSE_HALF_WIDTH = 8.0
_LATTICE_CHUNK = 1 << 20


class ContractViolation(ValueError):
    """An operation was called outside its declared preconditions."""


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper):
            raise ContractViolation("box corners have different dimensions")
        if any(not lo <= hi for lo, hi in zip(lower, upper)):
            raise ContractViolation(f"box lower corner {lower} exceeds upper corner {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, n, half_width=DEFAULT_UNIVERSE_HALF_WIDTH, center=None):
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        return cls(c - half_width, c + half_width)

    @property
    def dimension(self):
        return len(self.lower)

    @property
    def sides(self):
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self):
        return float(np.prod(np.maximum(self.sides, 0.0)))

    @property
    def is_degenerate(self):
        return bool(np.any(self.sides <= 0))

    def contains(self, points, closed=True):
        p = np.atleast_2d(points)
        if closed:
            return np.all((p >= self.lower) & (p <= self.upper), axis=1)
        return np.all((p > self.lower) & (p < self.upper), axis=1)

    def contains_ball(self, center, radius):
        c = np.asarray(center, dtype=float)
        return bool(np.all(c - radius >= self.lower) and np.all(c + radius <= self.upper))

    def intersection(self, other):
        lo = np.maximum(self.lower, other.lower)
        return Box(lo, np.maximum(lo, np.minimum(self.upper, other.upper)))

    def hull(self, other):
        return Box(np.minimum(self.lower, other.lower), np.maximum(self.upper, other.upper))

    def translate(self, v):
        return Box(np.add(self.lower, v), np.add(self.upper, v))

    def rescale(self, x, r):
        """Image under ``y -> (y - x) / r``."""
        return Box((np.asarray(self.lower) - x) / r, (np.asarray(self.upper) - x) / r)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise ContractViolation(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dimension(self):
        return len(self.center)

    @property
    def volume(self):
        return float(ball_volume(self.dimension, self.radius))

    @property
    def bbox(self):
        c = np.asarray(self.center)
        return Box(c - self.radius, c + self.radius)


@dataclass(frozen=True)
class QuadratureSpec:
    """Lattice quadrature settings.

    The lattice has ``samples_per_axis`` points per axis over the ball's
    bounding box and is refined ``refinement_levels`` times by doubling; the
    reported error is the difference between the last two levels. Line-section
    quadrature uses ``section_factor`` times as many columns.
    """

    samples_per_axis: int = 64
    refinement_levels: int = 1
    mode: str = "midpoint"
    seed: int = 0
    use_hooks: bool = True
    section_factor: int = 8

    def __post_init__(self):
        if self.samples_per_axis < 2:
            raise ContractViolation("samples_per_axis must be >= 2")
        if self.refinement_levels < 1:
            raise ContractViolation("refinement_levels must be >= 1")
        if self.mode not in ("midpoint", "stratified"):
            raise ContractViolation(f"unknown quadrature mode {self.mode!r}")

    def generic(self):
        """Same lattice, accelerators disabled."""
        return QuadratureSpec(self.samples_per_axis, self.refinement_levels, self.mode,
                              self.seed, False, self.section_factor)


@dataclass(frozen=True)
class Measurement:
    value: float
    error: float
    method: str = "lattice"

    @property
    def floor(self):
        return 2.0 * self.error

    @property
    def below_floor(self):
        return self.value <= self.floor


@dataclass(frozen=True, eq=False)
class ImplicitRegion:
    dimension: int
    membership: Callable
    bbox: Box
    label: str = ""
    sections: Optional[Callable] = field(default=None, repr=False)
    residual_hook: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise ContractViolation("dimension must be >= 1")
        if self.bbox.dimension != self.dimension:
            raise ContractViolation("bbox dimension does not match region dimension")

    def contains(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if p.shape[1] != self.dimension:
            raise ContractViolation(f"expected points in R^{self.dimension}, got shape {p.shape}")
        return np.asarray(self.membership(p), dtype=bool).reshape(p.shape[0])

    def __contains__(self, point):
        return bool(self.contains(point)[0])


def _check_dims(*regions):
    dims = {r.dimension for r in regions}
    if len(dims) != 1:
        raise ContractViolation(f"incompatible dimensions {sorted(dims)}")
    return dims.pop()


# ---------------------------------------------------------------- region algebra

def complement(E, universe=None):
    """``universe \\ E``; the universe defaults to ``[-8, 8]^n``."""
    n = E.dimension
    U = Box.cube(n) if universe is None else universe

    def member(p):
        return U.contains(p) & ~E.membership(p)

    sections = None
    if E.sections is not None:
        def sections(prefix):
            inside = np.all((prefix >= U.lower[:-1]) & (prefix <= U.upper[:-1]), axis=1)
            lo = np.where(inside, U.lower[-1], np.inf)
            hi = np.where(inside, U.upper[-1], np.inf)
            return iv.intersect(iv.single(lo, hi), iv.complement(*E.sections(prefix)))

    hook = None
    if E.residual_hook is not None:
        def hook(center, radius, quad):
            if not U.contains_ball(center, radius):
                return None
            res = E.residual_hook(center, radius, quad)
            if res is None:
                return None
            return float(ball_volume(n, radius)) - res[0], res[1]

    return ImplicitRegion(n, member, U, f"complement({E.label})", sections, hook)


def intersect(E, F):
    n = _check_dims(E, F)
    sections = None
    if E.sections is not None and F.sections is not None:
        def sections(prefix):
            return iv.intersect(E.sections(prefix), F.sections(prefix))
    return ImplicitRegion(n, lambda p: E.membership(p) & F.membership(p),
                          E.bbox.intersection(F.bbox), f"({E.label} ∩ {F.label})", sections)


def union(E, F):
    n = _check_dims(E, F)
    sections = None
    if E.sections is not None and F.sections is not None:
        def sections(prefix):
            return iv.union(E.sections(prefix), F.sections(prefix))
    return ImplicitRegion(n, lambda p: E.membership(p) | F.membership(p),
                          E.bbox.hull(F.bbox), f"({E.label} ∪ {F.label})", sections)


def symmetric_difference(E, F):
    n = _check_dims(E, F)
    return ImplicitRegion(n, lambda p: E.membership(p) ^ F.membership(p),
                          E.bbox.hull(F.bbox), f"({E.label} Δ {F.label})")


def translate(E, v):
    v = np.asarray(v, dtype=float)
    if v.shape != (E.dimension,):
        raise ContractViolation("translation vector has the wrong dimension")
    sections = None
    if E.sections is not None:
        def sections(prefix):
            return iv.affine(E.sections(prefix - v[:-1]), 1.0, np.full(len(prefix), v[-1]))
    hook = None
    if E.residual_hook is not None:
        def hook(center, radius, quad):
            return E.residual_hook(np.asarray(center) - v, radius, quad)
    return ImplicitRegion(E.dimension, lambda p: E.membership(p - v), E.bbox.translate(v),
                          f"{E.label}+{tuple(v)}", sections, hook)


def dilate(E, x, r):
    """The blow-up ``(E - x) / r``: membership at z iff ``x + r z`` is in E."""
    if not r > 0:
        raise ContractViolation(f"dilation factor must be positive, got {r}")
    x = np.asarray(x, dtype=float)
    n = E.dimension
    sections = None
    if E.sections is not None:
        def sections(prefix):
            return iv.affine(E.sections(x[:-1] + r * prefix), 1.0 / r, np.full(len(prefix), -x[-1] / r))
    hook = None
    if E.residual_hook is not None:
        def hook(center, radius, quad):
            res = E.residual_hook(x + r * np.asarray(center), r * radius, quad)
            if res is None:
                return None
            return res[0] / r ** n, res[1] / r ** n
    return ImplicitRegion(n, lambda p: E.membership(x + r * p), E.bbox.rescale(x, r),
                          f"({E.label}-{tuple(x)})/{r:g}", sections, hook)


# ---------------------------------------------------------------- quadrature

def _call_rng(quad, tag, center, radius, level):
    h = hashlib.sha256()
    h.update(tag.encode())
    h.update(np.asarray(center, dtype=float).tobytes())
    h.update(struct.pack("<dq", radius, level))
    return np.random.default_rng([quad.seed, int.from_bytes(h.digest()[:8], "little")])


def _lattice_points(center, radius, k, quad, level, tag):
    """Yield chunks of lattice points inside the ball, plus the cell volume."""
    n = len(center)
    h = 2.0 * radius / k
    axis = -radius + (np.arange(k) + 0.5) * h
    rng = _call_rng(quad, tag, center, radius, level) if quad.mode == "stratified" else None
    rows_per_chunk = max(1, _LATTICE_CHUNK // max(k ** (n - 1), 1))
    for start in range(0, k, rows_per_chunk):
        first = axis[start:start + rows_per_chunk]
        grids = np.meshgrid(first, *([axis] * (n - 1)), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        if rng is not None:
            pts = pts + rng.uniform(-0.5 * h, 0.5 * h, size=pts.shape)
        inside = np.einsum("ij,ij->i", pts, pts) < radius * radius
        yield pts[inside] + center, h ** n


def _lattice_residual(E, center, radius, quad):
    n = E.dimension
    vol = float(ball_volume(n, radius))
    values = []
    for level in range(quad.refinement_levels + 1):
        k = quad.samples_per_axis * 2 ** level
        n_in = n_out = 0
        for pts, _ in _lattice_points(center, radius, k, quad, level, "residual"):
            n_in += len(pts)
            if len(pts):
                n_out += int(np.count_nonzero(~E.contains(pts)))
        values.append(vol * n_out / n_in if n_in else 0.0)
    return Measurement(values[-1], abs(values[-1] - values[-2]), f"lattice-{quad.mode}")


def _gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _section_columns(center, radius, m):
    theta = -0.5 * np.pi + (np.arange(m) + 0.5) * np.pi / m
    x1 = center[0] + radius * np.sin(theta)
    half = radius * np.cos(theta)
    weight = half * (np.pi / m)
    return x1, half, weight


def _fubini(E, center, radius, quad, weight_fn=None, inside=False, order=6):
    """Integrate over ``B \\ E`` (or ``B ∩ E``) with exact line sections.

    n = 1: the ball is a single line. n = 2: columns parallel to the last
    axis, placed at ``x1 = c1 + r sin(theta)`` with midpoint spacing in theta.
    """
    n = E.dimension
    if n == 1:
        secs = E.sections(np.zeros((1, 0)))
        chord = iv.single([center[0] - radius], [center[0] + radius])
        pieces = iv.intersect(chord, secs if inside else iv.complement(*secs))
        if weight_fn is None:
            return Measurement(float(iv.total_length(pieces)[0]), 0.0, "sections")
        vals = [_piece_integral(pieces, lambda t: weight_fn(t.reshape(-1, 1)), o) for o in (order, 2 * order)]
        return Measurement(float(vals[-1][0]), float(abs(vals[-1][0] - vals[0][0])), "sections")

    values = []
    for level in range(quad.refinement_levels + 1):
        m = quad.samples_per_axis * quad.section_factor * 2 ** level
        x1, half, w = _section_columns(center, radius, m)
        secs = E.sections(x1.reshape(-1, 1))
        chord = iv.single(center[1] - half, center[1] + half)
        pieces = iv.intersect(chord, secs if inside else iv.complement(*secs))
        if weight_fn is None:
            inner = iv.total_length(pieces)
        else:
            def fn(t, x1=x1):
                cols = np.broadcast_to(x1[:, None, None], t.shape)
                pts = np.stack([cols.ravel(), t.ravel()], axis=1)
                return weight_fn(pts).reshape(t.shape)
            inner = _piece_integral(pieces, fn, order)
        values.append(float(np.sum(inner * w)))
    return Measurement(values[-1], abs(values[-1] - values[-2]), "sections")


def _piece_integral(pieces, fn, order):
    """Gauss-Legendre integral of ``fn(t)`` over each row's intervals."""
    lo, hi = pieces
    valid = lo < hi
    a = np.where(valid, lo, 0.0)
    b = np.where(valid, hi, 0.0)
    x, w = _gauss_legendre(order)
    mid, rad = 0.5 * (a + b), 0.5 * (b - a)
    t = mid[:, :, None] + rad[:, :, None] * x
    vals = fn(t) * w
    return np.sum(np.sum(vals, axis=2) * rad, axis=1)


def residual_measure(E, b, quad=None):
    """Estimate ``L^n(b \\ E)``.

    Uses, in order of preference when ``quad.use_hooks`` is set: the region's
    residual hook, exact line sections (n <= 2), then the point lattice.
    """
    quad = quad or QuadratureSpec()
    if E.dimension != b.dimension:
        raise ContractViolation(f"region is in R^{E.dimension} but ball is in R^{b.dimension}")
    center = np.asarray(b.center)
    vol = b.volume
    if quad.use_hooks:
        if E.residual_hook is not None:
            res = E.residual_hook(center, b.radius, quad)
            if res is not None:
                return Measurement(min(max(res[0], 0.0), vol), res[1], "hook")
        if E.sections is not None and E.dimension <= 2:
            m = _fubini(E, center, b.radius, quad)
            return Measurement(min(max(m.value, 0.0), vol), m.error, m.method)
    m = _lattice_residual(E, center, b.radius, quad)
    return Measurement(min(max(m.value, 0.0), vol), m.error, m.method)


def integrate(E, b, weight_fn, quad=None, inside=False):
    """``∫ weight`` over ``b \\ E`` (default) or ``b ∩ E``.

    ``weight_fn`` maps an ``(N, n)`` array of points to ``N`` values.
    """
    quad = quad or QuadratureSpec()
    if E.dimension != b.dimension:
        raise ContractViolation("dimension mismatch")
    center = np.asarray(b.center)
    if quad.use_hooks and E.sections is not None and E.dimension <= 2:
        return _fubini(E, center, b.radius, quad, weight_fn, inside)
    values = []
    for level in range(quad.refinement_levels + 1):
        k = quad.samples_per_axis * 2 ** level
        total = 0.0
        for pts, cell in _lattice_points(center, b.radius, k, quad, level, "integrate"):
            if len(pts):
                sel = E.contains(pts)
                if not inside:
                    sel = ~sel
                if sel.any():
                    total += float(np.sum(weight_fn(pts[sel]))) * cell
        values.append(total)
    return Measurement(values[-1], abs(values[-1] - values[-2]), f"lattice-{quad.mode}")


# ---------------------------------------------------------------- grids

_MAGIC = b"GRIDRGN1"


@dataclass(frozen=True, eq=False)
class GridRegion:
    """A boolean mask of axis-aligned cells; cell ``i`` spans
    ``origin + i * spacing`` to ``origin + (i + 1) * spacing``."""

    origin: tuple
    spacing: tuple
    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        n = mask.ndim
        origin = tuple(float(v) for v in np.broadcast_to(np.asarray(self.origin, dtype=float), (n,)))
        spacing = tuple(float(v) for v in np.broadcast_to(np.asarray(self.spacing, dtype=float), (n,)))
        if any(not s > 0 for s in spacing):
            raise ContractViolation("grid spacing must be positive")
        mask.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "mask", mask)

    @property
    def dimension(self):
        return self.mask.ndim

    @property
    def shape(self):
        return self.mask.shape

    @property
    def extent(self):
        lo = np.asarray(self.origin)
        return Box(lo, lo + np.asarray(self.spacing) * self.shape)

    def cell_volume_exact(self):
        return math.prod(Fraction(s) for s in self.spacing)

    def measure_exact(self):
        return int(np.count_nonzero(self.mask)) * self.cell_volume_exact()

    def measure(self):
        """Cell count times cell volume, correctly rounded."""
        return float(self.measure_exact())

    def _same_extent(self, other):
        if self.shape != other.shape or self.origin != other.origin or self.spacing != other.spacing:
            raise ContractViolation("grid regions must share origin, spacing and shape")

    def complement(self):
        return GridRegion(self.origin, self.spacing, ~self.mask)

    def union(self, other):
        self._same_extent(other)
        return GridRegion(self.origin, self.spacing, self.mask | other.mask)

    def intersection(self, other):
        self._same_extent(other)
        return GridRegion(self.origin, self.spacing, self.mask & other.mask)

    def cell_index(self, points):
        p = np.atleast_2d(points)
        idx = np.floor((p - np.asarray(self.origin)) / np.asarray(self.spacing)).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < np.asarray(self.shape)), axis=1)
        return idx, ok

    def to_region(self, label="grid"):
        def member(p):
            idx, ok = self.cell_index(p)
            out = np.zeros(len(p), dtype=bool)
            if ok.any():
                out[ok] = self.mask[tuple(idx[ok].T)]
            return out
        return ImplicitRegion(self.dimension, member, self.extent, label)

    def to_bytes(self):
        """Little-endian layout: magic, n (uint64), per-axis cell counts
        (uint64), origin and spacing (float64), then the row-major mask packed
        eight cells per byte, most significant bit first."""
        n = self.dimension
        head = _MAGIC + struct.pack(f"<Q{n}Q{n}d{n}d", n, *self.shape, *self.origin, *self.spacing)
        return head + np.packbits(self.mask.ravel(order="C")).tobytes()

    @classmethod
    def from_bytes(cls, data):
        if data[:8] != _MAGIC:
            raise ContractViolation("not a GRIDRGN1 stream")
        (n,) = struct.unpack_from("<Q", data, 8)
        fields = struct.unpack_from(f"<{n}Q{n}d{n}d", data, 16)
        shape = tuple(int(v) for v in fields[:n])
        origin, spacing = fields[n:2 * n], fields[2 * n:]
        offset = 16 + 8 * 3 * n
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=offset), count=math.prod(shape))
        return cls(origin, spacing, bits.astype(bool).reshape(shape))

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def grid_measure(G):
    return G.measure()


def rasterize(E, spacing, window):
    """Cell is true iff the membership predicate holds at its midpoint."""
    n = E.dimension
    if window.dimension != n:
        raise ContractViolation("window dimension mismatch")
    if window.is_degenerate:
        raise ContractViolation("rasterization window is degenerate")
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (n,))
    if np.any(spacing <= 0):
        raise ContractViolation("spacing must be positive")
    ratio = window.sides / spacing
    counts = np.where(np.abs(ratio - np.round(ratio)) < 1e-9, np.round(ratio), np.ceil(ratio)).astype(int)
    origin = np.asarray(window.lower)
    axes = [origin[i] + (np.arange(counts[i]) + 0.5) * spacing[i] for i in range(n)]
    mask = np.zeros(tuple(counts), dtype=bool)
    inner = int(np.prod(counts[1:])) if n > 1 else 1
    rows = max(1, _LATTICE_CHUNK // inner)
    for start in range(0, counts[0], rows):
        grids = np.meshgrid(axes[0][start:start + rows], *axes[1:], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        mask[start:start + rows] = E.contains(pts).reshape(grids[0].shape)
    return GridRegion(tuple(origin), tuple(spacing), mask)


def unit_ball(n):
    return unit_ball_volume(n)
