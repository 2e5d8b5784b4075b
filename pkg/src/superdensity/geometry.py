"""Closed-form volumes of balls, caps, lenses and disc/box overlaps."""
import math

import numpy as np
from scipy.special import betainc, gammaln


def unit_ball_volume(n):
    """Lebesgue measure of the unit ball in R^n."""
    return math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0))


def ball_volume(n, r):
    return unit_ball_volume(n) * np.power(r, n)


def cap_volume(n, r, d):
    """Volume of ``{y in B(0, r) : y_1 > d}``.

    Vectorized over ``r`` and ``d``; ``d`` may be negative or exceed ``r``.
    """
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    t = np.clip(np.abs(d) / r, 0.0, 1.0)
    # regularized incomplete beta in whichever argument keeps full precision
    a, b = 0.5 * (n + 1), 0.5
    near = t * t < 0.5
    frac = np.where(near, 1.0 - betainc(b, a, t * t), betainc(a, b, 1.0 - t * t))
    half = 0.5 * ball_volume(n, r) * frac
    full = ball_volume(n, r)
    out = np.where(d >= 0, half, full - half)
    out = np.where(d >= r, 0.0, out)
    return np.where(d <= -r, full, out)


def ball_intersection_volume(n, c1, r1, c2, r2):
    """Volume of ``B(c1, r1) ∩ B(c2, r2)``; vectorized over the second ball.

    ``c2`` may be an ``(N, n)`` array with ``r2`` of shape ``(N,)``.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.atleast_2d(np.asarray(c2, dtype=float))
    r2 = np.broadcast_to(np.asarray(r2, dtype=float), (c2.shape[0],))
    d = np.sqrt(np.sum((c2 - c1) ** 2, axis=1))
    out = np.zeros_like(d)
    small = np.minimum(r1, r2)
    nested = d <= np.abs(r1 - r2)
    out[nested] = ball_volume(n, small[nested])
    part = (d < r1 + r2) & ~nested
    if np.any(part):
        dp, rp = d[part], r2[part]
        a = (dp * dp + r1 * r1 - rp * rp) / (2.0 * dp)
        out[part] = cap_volume(n, r1, a) + cap_volume(n, rp, dp - a)
    return out


def _chord_integral(r, a, b):
    """Integral of sqrt(r^2 - x^2) over [a, b] within [-r, r]."""
    def prim(x):
        x = min(max(x, -r), r)
        return 0.5 * (x * math.sqrt(max(r * r - x * x, 0.0)) + r * r * math.asin(x / r))
    return prim(b) - prim(a)


def disc_box_area(center, r, lower, upper):
    """Exact area of ``B(center, r) ∩ [lower, upper]`` in the plane.

    For n = 1 this is the overlap length of two intervals.
    """
    center = np.asarray(center, dtype=float)
    if center.size == 1:
        lo = max(center[0] - r, lower[0])
        hi = min(center[0] + r, upper[0])
        return max(hi - lo, 0.0)
    a, b = lower[0] - center[0], upper[0] - center[0]
    c, d = lower[1] - center[1], upper[1] - center[1]
    lo, hi = max(a, -r), min(b, r)
    if hi <= lo or d <= c:
        return 0.0
    cuts = {lo, hi}
    for level in (c, d):
        if abs(level) < r:
            x = math.sqrt(r * r - level * level)
            cuts.update(v for v in (-x, x) if lo < v < hi)
    cuts = sorted(cuts)
    total = 0.0
    for x0, x1 in zip(cuts[:-1], cuts[1:]):
        xm = 0.5 * (x0 + x1)
        s = math.sqrt(max(r * r - xm * xm, 0.0))
        # pieces are cut at every crossing, so ties only happen at tangency,
        # where the arc is the binding boundary
        top_is_arc = s <= d
        bot_is_arc = -s >= c
        top = s if top_is_arc else d
        bot = -s if bot_is_arc else c
        if top <= bot:
            continue
        width = x1 - x0
        arc = _chord_integral(r, x0, x1)
        total += (arc if top_is_arc else d * width) - (-arc if bot_is_arc else c * width)
    return total
