"""Stationary germ-grain simulation in R^d (d = 1, 2, 3).

Germs are Poisson with constant intensity; grains are i.i.d. balls, boxes or
intervals attached to them.  Edge effects are removed by plus-sampling: germs
are drawn on the observation window dilated by the grain support's bounding
half-extents, so the restriction of the union set to the window has exactly
the stationary law (grains that miss the window contribute nothing).

Covered volumes are computed exactly in d = 1 by an interval sweep, and by
point-membership sampling otherwise (random points with a standard error, or
a fixed low-discrepancy point set for bit-reproducible estimates).
"""

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats as _scipy_stats

from . import _cover

__all__ = [
    "UNIT_BALL_VOLUME",
    "Window",
    "FixedBall",
    "RandomBall",
    "FixedInterval",
    "FixedBox",
    "BooleanModelSpec",
    "Realization",
    "TailEstimate",
    "sample_realization",
    "measure_volume",
    "exactly_once_volume",
    "estimate_tail",
    "estimate_volume_fraction",
    "clipped_volumes",
    "clopper_pearson",
    "lowdisc_points",
]

UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}


def _as_rng(seed_or_rng, default=0):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    if seed_or_rng is None:
        seed_or_rng = default
    return np.random.default_rng(seed_or_rng)


# ---------------------------------------------------------------------------
# low-discrepancy points (generalized golden-ratio lattice)


@lru_cache(maxsize=None)
def _lattice_alpha(d):
    # unique real root > 1 of x**(d+1) = x + 1, then alpha_j = phi**-(j+1)
    phi = 1.5
    for _ in range(64):
        phi = phi - (phi ** (d + 1) - phi - 1.0) / ((d + 1) * phi**d - 1.0)
    return tuple(phi ** -(j + 1) for j in range(d))


def lowdisc_points(n, d):
    """First n points of the additive-recurrence lattice in [0, 1)^d.

    x_k = frac(0.5 + k * alpha) with alpha built from the generalized golden
    ratio; fully deterministic, so estimates built on it reproduce
    bit-for-bit for a given n.
    """
    alpha = np.array(_lattice_alpha(d))
    k = np.arange(1, n + 1, dtype=float)[:, None]
    return (0.5 + k * alpha[None, :]) % 1.0


@lru_cache(maxsize=None)
def _unit_ball_points(d, n):
    """n deterministic low-discrepancy points inside the unit d-ball."""
    if d == 1:
        pts = 2.0 * lowdisc_points(n, 1) - 1.0
        pts.flags.writeable = False
        return pts
    out = np.empty((n, d))
    have = 0
    offset = 0
    batch = max(64, int(n / 0.4))
    while have < n:
        cube = 2.0 * lowdisc_points(offset + batch, d)[offset:] - 1.0
        offset += batch
        inside = cube[(cube**2).sum(axis=1) <= 1.0]
        take = min(n - have, inside.shape[0])
        out[have : have + take] = inside[:take]
        have += take
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# window


class Window:
    """Axis-aligned observation box with positive volume."""

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("window bounds must be 1-d vectors of equal length")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise ValueError("window bounds must be finite")
        if not np.all(upper > lower):
            raise ValueError("window upper bounds must exceed lower bounds componentwise")
        lower.flags.writeable = False
        upper.flags.writeable = False
        self.lower = lower
        self.upper = upper

    @property
    def dimension(self):
        return self.lower.shape[0]

    @property
    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def dilate(self, half_extents):
        half = np.broadcast_to(np.asarray(half_extents, dtype=float), self.lower.shape)
        return Window(self.lower - half, self.upper + half)

    def uniform(self, n, rng):
        return rng.uniform(self.lower, self.upper, size=(n, self.dimension))

    def shift(self, delta):
        delta = np.broadcast_to(np.asarray(delta, dtype=float), self.lower.shape)
        return Window(self.lower + delta, self.upper + delta)

    def __eq__(self, other):
        return (
            isinstance(other, Window)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __repr__(self):
        return f"Window({self.lower.tolist()}, {self.upper.tolist()})"


# ---------------------------------------------------------------------------
# grain models


@dataclass(frozen=True)
class FixedBall:
    """Ball of deterministic radius centered at the germ."""

    radius: float

    kind = "ball"
    is_exact = True

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def check_dimension(self, d):
        return None

    def half_extents(self, d):
        return np.full(d, self.radius)

    def sample_params(self, n, d, rng):
        return np.full(n, self.radius)

    def mean_volume(self, d):
        return UNIT_BALL_VOLUME[d] * self.radius**d

    def second_moment_volume(self, d):
        return self.mean_volume(d) ** 2

    def max_volume(self, d):
        return self.mean_volume(d)

    def gamma1_truncation_bias(self, d):
        return 0.0


@dataclass(frozen=True, eq=False)
class RandomBall:
    """Ball with random radius drawn from a frozen scipy.stats distribution.

    Unbounded radius laws cannot be simulated exactly; radii are clipped at
    the ``truncation_quantile`` of the law and the induced downward bias on
    the volume intensity is reported through :meth:`gamma1_truncation_bias`.
    Laws with bounded support are simulated exactly.
    """

    radius_dist: object
    truncation_quantile: float = 1.0 - 1e-6

    kind = "ball"

    def __post_init__(self):
        if not (1.0 - 1e-4 <= self.truncation_quantile < 1.0):
            raise ValueError("truncation_quantile must lie in [1 - 1e-4, 1)")

    @property
    def is_exact(self):
        return math.isfinite(self.radius_dist.support()[1])

    def radius_cap(self):
        upper = self.radius_dist.support()[1]
        if math.isfinite(upper):
            return float(upper)
        return float(self.radius_dist.ppf(self.truncation_quantile))

    def check_dimension(self, d):
        return None

    def half_extents(self, d):
        return np.full(d, self.radius_cap())

    def sample_params(self, n, d, rng):
        r = self.radius_dist.rvs(size=n, random_state=rng)
        return np.minimum(np.asarray(r, dtype=float), self.radius_cap())

    def _clipped_radius_moment(self, k):
        cap = self.radius_cap()
        head = self.radius_dist.expect(lambda r: r**k, ub=cap)
        return float(head + cap**k * self.radius_dist.sf(cap))

    def mean_volume(self, d):
        return UNIT_BALL_VOLUME[d] * self._clipped_radius_moment(d)

    def second_moment_volume(self, d):
        return UNIT_BALL_VOLUME[d] ** 2 * self._clipped_radius_moment(2 * d)

    def max_volume(self, d):
        return UNIT_BALL_VOLUME[d] * self.radius_cap() ** d

    def gamma1_truncation_bias(self, d):
        """Per-germ mean volume lost to radius clipping (>= 0)."""
        if self.is_exact:
            return 0.0
        full = self.radius_dist.expect(lambda r: r**d)
        return UNIT_BALL_VOLUME[d] * float(full - self._clipped_radius_moment(d))


@dataclass(frozen=True)
class FixedInterval:
    """Interval of deterministic length centered at the germ (d = 1 only)."""

    length: float

    kind = "box"
    is_exact = True

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("length must be positive")

    def check_dimension(self, d):
        if d != 1:
            return "FixedInterval grains require dimension 1"
        return None

    def half_extents(self, d):
        return np.full(d, self.length / 2.0)

    def sample_params(self, n, d, rng):
        return np.full((n, d), self.length / 2.0)

    def mean_volume(self, d):
        return self.length

    def second_moment_volume(self, d):
        return self.length**2

    def max_volume(self, d):
        return self.length

    def gamma1_truncation_bias(self, d):
        return 0.0


@dataclass(frozen=True)
class FixedBox:
    """Axis-aligned box of deterministic side lengths centered at the germ."""

    sides: tuple

    kind = "box"
    is_exact = True

    def __post_init__(self):
        sides = tuple(float(s) for s in self.sides)
        if not sides or any(s <= 0 for s in sides):
            raise ValueError("box sides must be positive")
        object.__setattr__(self, "sides", sides)

    def check_dimension(self, d):
        if d != len(self.sides):
            return f"FixedBox has {len(self.sides)} sides but dimension is {d}"
        return None

    def half_extents(self, d):
        return np.asarray(self.sides) / 2.0

    def sample_params(self, n, d, rng):
        return np.tile(np.asarray(self.sides) / 2.0, (n, 1))

    def mean_volume(self, d):
        return float(np.prod(self.sides))

    def second_moment_volume(self, d):
        return self.mean_volume(d) ** 2

    def max_volume(self, d):
        return self.mean_volume(d)

    def gamma1_truncation_bias(self, d):
        return 0.0


@dataclass(frozen=True, eq=False)
class BooleanModelSpec:
    """Stationary model: dimension, germ intensity per unit volume, grain."""

    dimension: int
    germ_intensity: float
    grain: object

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if not self.germ_intensity >= 0:
            raise ValueError("germ_intensity must be nonnegative")
        problem = self.grain.check_dimension(self.dimension)
        if problem:
            raise ValueError(problem)

    def gamma1(self):
        """Volume intensity: germ intensity times mean grain volume."""
        return self.germ_intensity * self.grain.mean_volume(self.dimension)

    def gamma2(self):
        """Second-moment intensity: germ intensity times mean squared volume."""
        return self.germ_intensity * self.grain.second_moment_volume(self.dimension)

    def volume_fraction(self):
        return float(-np.expm1(-self.gamma1()))


# ---------------------------------------------------------------------------
# realizations


@dataclass(eq=False)
class Realization:
    """Sampled grains: centers plus radii (balls) or half-extents (boxes)."""

    kind: str
    centers: np.ndarray
    params: np.ndarray

    @property
    def n_grains(self):
        return self.centers.shape[0]

    @property
    def dimension(self):
        return self.centers.shape[1]

    def intervals(self):
        """(starts, ends) of the grains as 1-d intervals; d = 1 only."""
        if self.dimension != 1:
            raise ValueError("intervals() requires dimension 1")
        c = self.centers[:, 0]
        half = self.params if self.params.ndim == 1 else self.params[:, 0]
        return c - half, c + half

    def to_csv(self, path):
        d = self.dimension
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i + 1}" for i in range(d)] + ["param"])
            for i in range(self.n_grains):
                p = self.params[i] if self.params.ndim == 1 else self.params[i, 0]
                writer.writerow(
                    [format(x, ".17g") for x in self.centers[i]] + [format(p, ".17g")]
                )


def sample_realization(spec, window, seed):
    """Draw one plus-sampled realization; deterministic for a fixed seed."""
    rng = _as_rng(seed)
    d = spec.dimension
    dilated = window.dilate(spec.grain.half_extents(d))
    n = rng.poisson(spec.germ_intensity * dilated.volume)
    centers = dilated.uniform(n, rng)
    params = spec.grain.sample_params(n, d, rng)
    return Realization(spec.grain.kind, centers, params)


def _coverage_counts(realization, points):
    if realization.kind == "ball":
        return _cover.count_cover_balls(points, realization.centers, realization.params)
    return _cover.count_cover_boxes(points, realization.centers, realization.params)


def measure_volume(realization, window, method="exact_1d", n_points=65536, rng=None):
    """Volume of the union of grains clipped to the window.

    Returns (volume, standard_error).  ``exact_1d`` sweeps intervals (d = 1,
    se = 0); ``grid`` tests uniformly random points drawn from ``rng`` (an
    int seed or Generator, default seed 0) with se from the binomial
    fraction; ``quasi_mc`` tests a deterministic low-discrepancy point set
    (se reported as 0: unquantified).
    """
    if method == "exact_1d":
        if realization.dimension != 1 or window.dimension != 1:
            raise ValueError("exact_1d requires dimension 1")
        starts, ends = realization.intervals()
        lo, hi = float(window.lower[0]), float(window.upper[0])
        return _cover.union_length_1d(starts, ends, lo, hi), 0.0
    if method == "grid":
        points = window.uniform(n_points, _as_rng(rng))
        covered = _coverage_counts(realization, points) > 0
        frac = covered.mean()
        se = window.volume * math.sqrt(frac * (1.0 - frac) / n_points)
        return window.volume * frac, se
    if method == "quasi_mc":
        points = window.lower + lowdisc_points(n_points, window.dimension) * (
            window.upper - window.lower
        )
        covered = _coverage_counts(realization, points) > 0
        return window.volume * covered.mean(), 0.0
    raise ValueError(f"unknown volume method {method!r}")


def exactly_once_volume(realization, window, method="exact_1d", n_points=65536, rng=None):
    """Volume of the window points covered by exactly one grain.

    Pathwise at most the union volume; with matching ``rng``/``n_points``
    the sampled methods reuse identical points so the comparison is exact.
    """
    if method == "exact_1d":
        if realization.dimension != 1 or window.dimension != 1:
            raise ValueError("exact_1d requires dimension 1")
        starts, ends = realization.intervals()
        lo, hi = float(window.lower[0]), float(window.upper[0])
        return _cover.once_length_1d(starts, ends, lo, hi)
    if method == "grid":
        points = window.uniform(n_points, _as_rng(rng))
    elif method == "quasi_mc":
        points = window.lower + lowdisc_points(n_points, window.dimension) * (
            window.upper - window.lower
        )
    else:
        raise ValueError(f"unknown volume method {method!r}")
    once = _coverage_counts(realization, points) == 1
    return window.volume * once.mean()


def clipped_volumes(kind, centers, params, window, overlap_points=256):
    """Volume of each grain clipped to the window.

    Boxes (any d) and balls in d = 1 are exact; balls in d >= 2 use the
    deterministic unit-ball point set (relative error ~1/overlap_points).
    """
    d = window.dimension
    lo, hi = window.lower, window.upper
    if kind == "box":
        spans = np.minimum(centers + params, hi) - np.maximum(centers - params, lo)
        return np.prod(np.maximum(spans, 0.0), axis=1)
    if d == 1:
        c = centers[:, 0]
        spans = np.minimum(c + params, hi[0]) - np.maximum(c - params, lo[0])
        return np.maximum(spans, 0.0)
    return _cover.ball_box_overlaps(
        centers, params, _unit_ball_points(d, overlap_points), lo, hi, UNIT_BALL_VOLUME[d]
    )


# ---------------------------------------------------------------------------
# estimators


def clopper_pearson(successes, n, ci_level):
    """Exact binomial confidence limits; vectorized over success counts."""
    k = np.atleast_1d(np.asarray(successes))
    alpha = 1.0 - ci_level
    low = np.zeros(k.shape)
    high = np.ones(k.shape)
    pos = k > 0
    low[pos] = _scipy_stats.beta.ppf(alpha / 2.0, k[pos], n - k[pos] + 1)
    below = k < n
    high[below] = _scipy_stats.beta.ppf(1.0 - alpha / 2.0, k[below] + 1, n - k[below])
    return low, high


@dataclass(eq=False)
class TailEstimate:
    """Empirical upper tail P(F - EF >= r) with exact binomial limits."""

    r_grid: np.ndarray
    tail_hat: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_reps: int
    mean_f_hat: float
    se_mean: float
    ci_level: float
    mean_f_ref: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "tail", "ci_low", "ci_high"])
            for r, t, lo, hi in zip(self.r_grid, self.tail_hat, self.ci_low, self.ci_high):
                writer.writerow([format(v, ".12g") for v in (r, t, lo, hi)])


def _resolve_method(spec, method):
    if method == "auto":
        return "exact_1d" if spec.dimension == 1 else "grid"
    return method


def sample_volumes(spec, window, n_reps, seed, method="auto", n_points=8192):
    """Covered volumes from n_reps independent replications.

    Each replication runs on its own RNG stream spawned from ``seed``, so the
    result is reproducible and replications could run in any order.
    """
    method = _resolve_method(spec, method)
    children = np.random.SeedSequence(seed).spawn(n_reps)
    values = np.empty(n_reps)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        real = sample_realization(spec, window, rng)
        values[i], _ = measure_volume(real, window, method, n_points=n_points, rng=rng)
    return values


def estimate_tail(spec, window, r_grid, n_reps, seed, method="auto", n_points=8192, ci_level=0.95):
    """Empirical tail of the covered volume over a deviation grid.

    Deviations are measured from the analytic mean p * vol(W) when the model
    simulates its grain law exactly, and from the empirical mean otherwise
    (truncated radius laws bias the analytic value).  ``ci_level`` is the
    two-sided coverage of the binomial limits, so ci_level = 0.998 makes
    ``ci_low`` a one-sided 99.9% lower confidence limit.
    """
    if n_reps < 100:
        raise ValueError("n_reps must be at least 100")
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    if np.any(r_grid <= 0):
        raise ValueError("r_grid values must be positive")
    values = sample_volumes(spec, window, n_reps, seed, method, n_points)
    mean_hat = float(values.mean())
    se_mean = float(values.std(ddof=1) / math.sqrt(n_reps))
    ref = spec.volume_fraction() * window.volume if spec.grain.is_exact else mean_hat
    counts = (values[None, :] - ref >= r_grid[:, None]).sum(axis=1)
    tail = counts / n_reps
    ci_low, ci_high = clopper_pearson(counts, n_reps, ci_level)
    return TailEstimate(r_grid, tail, ci_low, ci_high, n_reps, mean_hat, se_mean, ci_level, ref)


def estimate_volume_fraction(spec, window, n_points, n_reps, seed):
    """Fraction of uniformly sampled window points covered, over replications.

    Returns (p_hat, se) with the standard error taken across replications,
    which absorbs the within-replication spatial correlation.
    """
    children = np.random.SeedSequence(seed).spawn(n_reps)
    fracs = np.empty(n_reps)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        real = sample_realization(spec, window, rng)
        points = window.uniform(n_points, rng)
        fracs[i] = (_coverage_counts(real, points) > 0).mean()
    se = float(fracs.std(ddof=1) / math.sqrt(n_reps)) if n_reps > 1 else 0.0
    return float(fracs.mean()), se
