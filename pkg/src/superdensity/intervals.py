"""Batched unions of intervals on the real line.

A batch is a pair ``(lo, hi)`` of arrays of shape ``(N, K)``: row ``i`` holds up
to ``K`` disjoint intervals. Empty slots are ``(inf, inf)``. Endpoint
openness is ignored; every consumer only measures these sets.
"""
import numpy as np

INF = np.inf


def normalize(lo, hi):
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    empty = ~(lo < hi)
    lo[empty] = INF
    hi[empty] = INF
    order = np.argsort(lo, axis=1, kind="stable")
    lo = np.take_along_axis(lo, order, axis=1)
    hi = np.take_along_axis(hi, order, axis=1)
    keep = np.any(np.isfinite(lo) | (lo < hi), axis=0)
    if not keep.any():
        return lo[:, :1], hi[:, :1]
    last = np.nonzero(keep)[0][-1] + 1
    return lo[:, :last], hi[:, :last]


def single(lo, hi):
    """One interval per row."""
    return normalize(np.asarray(lo, dtype=float).reshape(-1, 1),
                     np.asarray(hi, dtype=float).reshape(-1, 1))


def empty(n_rows):
    return np.full((n_rows, 1), INF), np.full((n_rows, 1), INF)


def full(n_rows):
    return np.full((n_rows, 1), -INF), np.full((n_rows, 1), INF)


def complement(lo, hi):
    """Complement in R; the input must be normalized (sorted, disjoint)."""
    n = lo.shape[0]
    starts = np.concatenate([np.full((n, 1), -INF), hi], axis=1)
    ends = np.concatenate([lo, np.full((n, 1), INF)], axis=1)
    return normalize(starts, ends)


def intersect(a, b):
    alo, ahi = a
    blo, bhi = b
    lo = np.maximum(alo[:, :, None], blo[:, None, :]).reshape(alo.shape[0], -1)
    hi = np.minimum(ahi[:, :, None], bhi[:, None, :]).reshape(alo.shape[0], -1)
    return normalize(lo, hi)


def union(a, b):
    return complement(*intersect(complement(*a), complement(*b)))


def affine(a, scale, shift):
    """Image of each row under ``t -> scale * t + shift`` (``scale > 0``)."""
    lo, hi = a
    shift = np.asarray(shift, dtype=float).reshape(-1, 1)
    return normalize(lo * scale + shift, hi * scale + shift)


def total_length(a):
    lo, hi = a
    with np.errstate(invalid="ignore"):
        width = np.where(lo < hi, hi - lo, 0.0)
    return width.sum(axis=1)
