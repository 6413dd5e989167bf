"""Hot geometry kernels: coverage counts, interval sweeps, grain clipping.

Every kernel exists twice: a ``*_numpy`` reference implementation and, when
numba is active (see :mod:`grainconc._accel`), an ``@njit``-compiled loop
version.  The module-level names without a suffix are bound to whichever
backend is active.  Counts are exact integers in both backends; the float
reductions may differ by rounding only.
"""

import numpy as np

from . import _accel

__all__ = [
    "count_cover_balls",
    "count_cover_boxes",
    "union_length_1d",
    "once_length_1d",
    "ball_box_overlaps",
]


# ---------------------------------------------------------------------------
# pure-numpy implementations


def count_cover_balls_numpy(points, centers, radii):
    """Per-point count of covering balls.

    points (n, d), centers (m, d), radii (m,) -> int64 (n,).
    """
    n = points.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    m = centers.shape[0]
    if m == 0:
        return counts
    r2 = radii * radii
    chunk = max(1, 1_000_000 // m)
    for i in range(0, n, chunk):
        p = points[i : i + chunk]
        d2 = ((p[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        counts[i : i + chunk] = (d2 <= r2[None, :]).sum(axis=1)
    return counts


def count_cover_boxes_numpy(points, centers, halves):
    """Per-point count of covering axis-aligned boxes (centers +- halves)."""
    n = points.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    m = centers.shape[0]
    if m == 0:
        return counts
    chunk = max(1, 1_000_000 // m)
    for i in range(0, n, chunk):
        p = points[i : i + chunk]
        inside = (np.abs(p[:, None, :] - centers[None, :, :]) <= halves[None, :, :]).all(axis=2)
        counts[i : i + chunk] = inside.sum(axis=1)
    return counts


def union_length_1d_numpy(starts, ends, lo, hi):
    """Length of the union of intervals clipped to [lo, hi]."""
    s = np.clip(starts, lo, hi)
    e = np.clip(ends, lo, hi)
    keep = e > s
    s, e = s[keep], e[keep]
    if s.size == 0:
        return 0.0
    order = np.argsort(s, kind="stable")
    s, e = s[order], e[order]
    prev = np.concatenate(([-np.inf], np.maximum.accumulate(e)[:-1]))
    return float(np.maximum(0.0, e - np.maximum(s, prev)).sum())


def once_length_1d_numpy(starts, ends, lo, hi):
    """Length of the set covered by exactly one interval, clipped to [lo, hi].

    Event ordering at coincident endpoints is irrelevant: zero-length
    segments contribute nothing, and the running count is restored once all
    events at a coordinate are consumed.
    """
    s = np.clip(starts, lo, hi)
    e = np.clip(ends, lo, hi)
    keep = e > s
    s, e = s[keep], e[keep]
    if s.size == 0:
        return 0.0
    pts = np.concatenate([s, e])
    delta = np.concatenate([np.ones(s.size, dtype=np.int64), -np.ones(e.size, dtype=np.int64)])
    order = np.argsort(pts, kind="stable")
    pts, delta = pts[order], delta[order]
    active = np.cumsum(delta)
    seg = np.diff(pts)
    return float(seg[active[:-1] == 1].sum())


def ball_box_overlaps_numpy(centers, radii, unit_points, lo, hi, unit_ball_volume):
    """Volume of each ball clipped to the box [lo, hi].

    ``unit_points`` (k, d) are fixed points uniform in the unit ball; the
    clipped volume is estimated as vol(ball) times the fraction of its points
    falling inside the box.  Deterministic given the point set.
    """
    m, d = centers.shape
    out = np.empty(m)
    k = unit_points.shape[0]
    chunk = max(1, 400_000 // max(1, k))
    for i in range(0, m, chunk):
        c = centers[i : i + chunk]
        r = radii[i : i + chunk]
        pts = c[:, None, :] + r[:, None, None] * unit_points[None, :, :]
        inside = ((pts >= lo) & (pts <= hi)).all(axis=2)
        out[i : i + chunk] = inside.mean(axis=1) * unit_ball_volume * r**d
    return out


# ---------------------------------------------------------------------------
# numba implementations

if _accel.HAVE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def count_cover_balls_numba(points, centers, radii):
        n = points.shape[0]
        m = centers.shape[0]
        d = points.shape[1]
        counts = np.zeros(n, dtype=np.int64)
        for i in range(n):
            c = 0
            for j in range(m):
                acc = 0.0
                for k in range(d):
                    diff = points[i, k] - centers[j, k]
                    acc += diff * diff
                if acc <= radii[j] * radii[j]:
                    c += 1
            counts[i] = c
        return counts

    @njit(cache=True)
    def count_cover_boxes_numba(points, centers, halves):
        n = points.shape[0]
        m = centers.shape[0]
        d = points.shape[1]
        counts = np.zeros(n, dtype=np.int64)
        for i in range(n):
            c = 0
            for j in range(m):
                inside = True
                for k in range(d):
                    if abs(points[i, k] - centers[j, k]) > halves[j, k]:
                        inside = False
                        break
                if inside:
                    c += 1
            counts[i] = c
        return counts

    @njit(cache=True)
    def union_length_1d_numba(starts, ends, lo, hi):
        n = starts.shape[0]
        s = np.empty(n)
        e = np.empty(n)
        m = 0
        for i in range(n):
            a = min(max(starts[i], lo), hi)
            b = min(max(ends[i], lo), hi)
            if b > a:
                s[m] = a
                e[m] = b
                m += 1
        if m == 0:
            return 0.0
        s = s[:m]
        e = e[:m]
        order = np.argsort(s)
        total = 0.0
        prev = -np.inf
        for idx in order:
            a = s[idx]
            b = e[idx]
            left = a if a > prev else prev
            if b > left:
                total += b - left
            if b > prev:
                prev = b
        return total

    @njit(cache=True)
    def once_length_1d_numba(starts, ends, lo, hi):
        n = starts.shape[0]
        s = np.empty(n)
        e = np.empty(n)
        m = 0
        for i in range(n):
            a = min(max(starts[i], lo), hi)
            b = min(max(ends[i], lo), hi)
            if b > a:
                s[m] = a
                e[m] = b
                m += 1
        if m == 0:
            return 0.0
        pts = np.empty(2 * m)
        delta = np.empty(2 * m, dtype=np.int64)
        for i in range(m):
            pts[i] = s[i]
            delta[i] = 1
            pts[m + i] = e[i]
            delta[m + i] = -1
        order = np.argsort(pts)
        total = 0.0
        active = 0
        prev = pts[order[0]]
        for j in range(2 * m):
            x = pts[order[j]]
            if active == 1 and x > prev:
                total += x - prev
            active += delta[order[j]]
            prev = x
        return total

    @njit(cache=True)
    def ball_box_overlaps_numba(centers, radii, unit_points, lo, hi, unit_ball_volume):
        m, d = centers.shape
        k = unit_points.shape[0]
        out = np.empty(m)
        for j in range(m):
            hits = 0
            for t in range(k):
                inside = True
                for a in range(d):
                    x = centers[j, a] + radii[j] * unit_points[t, a]
                    if x < lo[a] or x > hi[a]:
                        inside = False
                        break
                if inside:
                    hits += 1
            out[j] = hits / k * unit_ball_volume * radii[j] ** d
        return out


if _accel.NUMBA_ACTIVE:
    count_cover_balls = count_cover_balls_numba
    count_cover_boxes = count_cover_boxes_numba
    union_length_1d = union_length_1d_numba
    once_length_1d = once_length_1d_numba
    ball_box_overlaps = ball_box_overlaps_numba
else:
    count_cover_balls = count_cover_balls_numpy
    count_cover_boxes = count_cover_boxes_numpy
    union_length_1d = union_length_1d_numpy
    once_length_1d = once_length_1d_numpy
    ball_box_overlaps = ball_box_overlaps_numpy
