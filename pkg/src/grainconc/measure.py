"""Discrete measures on (0, inf), grain-volume laws and their transforms.

Every bound downstream only needs atom sums of the form
sum_i w_i * K(s * u_i) for smooth kernels K, so measures are kept as sorted,
deduplicated atom arrays and each transform is an exact finite sum.  The
central transforms are the exponential growth rate

    cumulant_derivative(m, s) = sum w * u * (exp(s*u) - 1)

its generalized inverse, and the optimized Chernoff exponent, which by convex
duality has the closed form s*r - cumulant_integral(m, s*) at s* solving
cumulant_derivative(m, s*) = r.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .kernels import exp_excess, exprel_neg
from . import simulate as _sim

__all__ = [
    "DiscreteMeasure",
    "GrainVolumeLaw",
    "PointMassVolume",
    "GammaVolume",
    "GammaLevyVolume",
    "ExponentialVolume",
    "EmpiricalVolume",
    "cumulant_integral",
    "cumulant_derivative",
    "cumulant_derivative_inverse",
    "chernoff_exponent",
    "stationary_jump_measure",
    "stationary_grain_measure",
    "volume_law_for",
]

DEFAULT_ROOT_TOL = 1e-10


class DiscreteMeasure:
    """Finite atomic measure on (0, inf).

    Atoms are canonicalized on construction: sorted ascending, duplicates
    merged by summing weights, zero-weight atoms dropped.  Instances are
    immutable (arrays are read-only) and therefore safe to share.

    ``total_mass_finite=False`` marks a measure that stands in for one with
    infinite total mass; it only changes ``moment(0)``, which then reports
    +inf.
    """

    __slots__ = ("u", "w", "total_mass_finite")

    def __init__(self, u=(), w=(), total_mass_finite=True):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if u.size == 0:
            u = u.reshape(0)
            w = w.reshape(0)
        if u.shape != w.shape or u.ndim != 1:
            raise ValueError("atom locations and weights must be 1-d and equal length")
        if u.size and (not np.all(np.isfinite(u)) or np.any(u <= 0)):
            raise ValueError("atom locations must be finite and positive")
        if w.size and (not np.all(np.isfinite(w)) or np.any(w < 0)):
            raise ValueError("atom weights must be finite and nonnegative")
        keep = w > 0
        u, w = u[keep], w[keep]
        uu, inverse = np.unique(u, return_inverse=True)
        ww = np.zeros_like(uu)
        np.add.at(ww, inverse, w)
        uu.flags.writeable = False
        ww.flags.writeable = False
        self.u = uu
        self.w = ww
        self.total_mass_finite = bool(total_mass_finite)

    @classmethod
    def point_mass(cls, u, w=1.0):
        return cls([u], [w])

    @classmethod
    def zero(cls):
        return cls()

    @property
    def n_atoms(self):
        return self.u.size

    @property
    def is_zero(self):
        return self.u.size == 0

    def moment(self, i):
        """i-th moment sum(w * u**i) for i in {0, 1, 2}.

        Returns +inf for i = 0 when the measure represents an
        infinite-total-mass law.
        """
        if i not in (0, 1, 2):
            raise ValueError("moment order must be 0, 1 or 2")
        if i == 0 and not self.total_mass_finite:
            return math.inf
        return float(np.sum(self.w * self.u**i))

    def scaled_weights(self, factor):
        return DiscreteMeasure(self.u, self.w * factor, self.total_mass_finite)

    def scaled_atoms(self, factor):
        if not factor > 0:
            raise ValueError("atom scale factor must be positive")
        return DiscreteMeasure(self.u * factor, self.w, self.total_mass_finite)

    def __eq__(self, other):
        return (
            isinstance(other, DiscreteMeasure)
            and self.total_mass_finite == other.total_mass_finite
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.w, other.w)
        )

    def __repr__(self):
        return f"DiscreteMeasure({self.n_atoms} atoms, mass={float(np.sum(self.w)):.6g})"

    def to_csv(self, path_or_file):
        """Write atoms as ``u,w`` rows (ascending u, full float precision)."""
        if hasattr(path_or_file, "write"):
            self._write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                self._write(fh)

    def _write(self, fh):
        writer = csv.writer(fh)
        writer.writerow(["u", "w"])
        for u, w in zip(self.u, self.w):
            writer.writerow([format(u, ".17g"), format(w, ".17g")])

    @classmethod
    def from_csv(cls, path_or_file, total_mass_finite=True):
        if hasattr(path_or_file, "read"):
            return cls._read(path_or_file, total_mass_finite)
        with open(path_or_file, newline="") as fh:
            return cls._read(fh, total_mass_finite)

    @classmethod
    def _read(cls, fh, total_mass_finite):
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["u", "w"]:
            raise ValueError("expected a CSV with header 'u,w'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
        u = [r[0] for r in rows]
        w = [r[1] for r in rows]
        return cls(u, w, total_mass_finite)

    def to_csv_string(self):
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# transforms on discrete measures


def cumulant_integral(measure, s):
    """sum(w * (exp(s*u) - 1 - s*u)); the integrated growth rate at s >= 0."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if measure.is_zero or s == 0:
        return 0.0
    return float(np.sum(measure.w * exp_excess(s * measure.u)))


def cumulant_derivative(measure, s):
    """sum(w * u * (exp(s*u) - 1)); zero at s = 0, may overflow to +inf."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if measure.is_zero or s == 0:
        return 0.0
    with np.errstate(over="ignore"):
        return float(np.sum(measure.w * measure.u * np.expm1(s * measure.u)))


def _cumulant_derivative2(measure, s):
    with np.errstate(over="ignore"):
        return float(np.sum(measure.w * measure.u**2 * np.exp(s * measure.u)))


def cumulant_derivative_inverse(measure, target, tol=DEFAULT_ROOT_TOL):
    """Generalized inverse inf{s >= 0 : cumulant_derivative(m, s) >= target}.

    Returns 0 at target = 0 and +inf for positive targets on the zero
    measure.  Otherwise the derivative is smooth and strictly increasing, so
    a doubling bracket plus safeguarded Newton converges unconditionally; the
    returned s satisfies |h(s) - target| <= tol * max(1, target).
    """
    if target < 0:
        raise ValueError("target must be nonnegative")
    if target == 0:
        return 0.0
    if measure.is_zero:
        return math.inf
    hi = 1.0
    while cumulant_derivative(measure, hi) < target:
        hi *= 2.0
        if hi > 1e12:  # unreachable for nonzero measures: h diverges
            return math.inf
    lo = 0.0
    s = 0.5 * hi
    for _ in range(200):
        h = cumulant_derivative(measure, s)
        if abs(h - target) <= tol * max(1.0, target):
            return s
        if h >= target:
            hi = s
        else:
            lo = s
        d = _cumulant_derivative2(measure, s)
        if math.isfinite(h) and math.isfinite(d) and d > 0:
            step = s - (h - target) / d
        else:
            step = 0.5 * (lo + hi)
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, hi):
            return 0.5 * (lo + hi)
        s = step
    return s


def chernoff_exponent(measure, r, tol=DEFAULT_ROOT_TOL, s_max=math.inf):
    """Integral of the inverse growth rate over [0, r], in closed form.

    By convex duality the integral equals s*r - cumulant_integral(m, s*)
    with s* the inverse at r, because the antiderivative of the growth rate
    is exactly the cumulant integral.  The root-finding error enters only
    quadratically (the integrand is stationary at s*).

    Valid for 0 < r < h(s_max-); a :class:`DomainError` carrying that limit
    is raised otherwise.
    """
    if measure.is_zero:
        raise DomainError("zero measure: no upper deviations to bound", limit=0.0)
    limit = math.inf if math.isinf(s_max) else cumulant_derivative(measure, s_max)
    if not 0 < r < limit:
        raise DomainError(
            f"deviation r={r!r} outside the validity domain (0, {limit!r})", limit=limit
        )
    s_star = cumulant_derivative_inverse(measure, r, tol)
    return s_star * r - cumulant_integral(measure, s_star)


# ---------------------------------------------------------------------------
# grain-volume laws


def _invert_increasing(fn, target, s_hi, tol):
    """Inverse of an increasing fn with fn(0) = 0 by bracketed bisection."""
    if target <= 0:
        return 0.0
    if math.isinf(s_hi):
        hi = 1.0
        while fn(hi) < target:
            hi *= 2.0
            if hi > 1e12:
                return math.inf
    else:
        hi = s_hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v = fn(mid)
        if math.isfinite(v) and abs(v - target) <= tol * max(1.0, target):
            return mid
        if v >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


class GrainVolumeLaw:
    """Law of the typical grain volume feeding the parametric bounds.

    Subclasses expose the mean, second moment, total mass (may be +inf for
    Levy-type laws), the supremum ``s_max`` of exponential integrability, the
    exponential growth transform and its inverse.  Values of the transform at
    s >= s_max are +inf, which the Chernoff optimizer treats as infeasible.
    """

    finite_mass = True

    def total_mass(self):
        return 1.0

    def s_max(self):
        return math.inf

    def cumulant_derivative_inverse(self, target, tol=DEFAULT_ROOT_TOL):
        return _invert_increasing(self.cumulant_derivative, target, self.s_max(), tol)


@dataclass(frozen=True)
class PointMassVolume(GrainVolumeLaw):
    """Deterministic grain volume."""

    volume: float

    def __post_init__(self):
        if not self.volume > 0:
            raise ValueError("volume must be positive")

    def mean(self):
        return self.volume

    def second_moment(self):
        return self.volume**2

    def cumulant_derivative(self, s):
        if s < 0:
            raise ValueError("s must be nonnegative")
        with np.errstate(over="ignore"):
            return float(self.volume * np.expm1(s * self.volume))

    def cumulant_derivative_inverse(self, target, tol=DEFAULT_ROOT_TOL):
        if target < 0:
            raise ValueError("target must be nonnegative")
        return float(np.log1p(target / self.volume) / self.volume)


@dataclass(frozen=True)
class GammaVolume(GrainVolumeLaw):
    """Gamma-distributed grain volume with shape alpha and rate beta.

    Growth transform alpha*beta**alpha/(beta-s)**(alpha+1) - alpha/beta for
    s < beta (else +inf); the inverse is available in closed form.
    """

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("shape and rate must be positive")

    def mean(self):
        return self.shape / self.rate

    def second_moment(self):
        return self.shape * (self.shape + 1.0) / self.rate**2

    def s_max(self):
        return self.rate

    def cumulant_derivative(self, s):
        if s < 0:
            raise ValueError("s must be nonnegative")
        a, b = self.shape, self.rate
        if s >= b:
            return math.inf
        return a * b**a / (b - s) ** (a + 1.0) - a / b

    def cumulant_derivative_inverse(self, target, tol=DEFAULT_ROOT_TOL):
        if target < 0:
            raise ValueError("target must be nonnegative")
        a, b = self.shape, self.rate
        return b * (1.0 - (a / (b * target + a)) ** (1.0 / (a + 1.0)))


def ExponentialVolume(rate):
    """Exponentially distributed grain volume (a Gamma law with shape 1)."""
    return GammaVolume(1.0, rate)


@dataclass(frozen=True)
class GammaLevyVolume(GrainVolumeLaw):
    """Gamma Levy-measure volume law: density alpha * u**-1 * exp(-beta*u).

    Infinite total mass but finite first moment alpha/beta; growth transform
    alpha*s/(beta*(beta-s)) for s < beta with closed-form inverse.
    """

    shape: float
    rate: float

    finite_mass = False

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("shape and rate must be positive")

    def total_mass(self):
        return math.inf

    def mean(self):
        return self.shape / self.rate

    def second_moment(self):
        return self.shape / self.rate**2

    def s_max(self):
        return self.rate

    def cumulant_derivative(self, s):
        if s < 0:
            raise ValueError("s must be nonnegative")
        a, b = self.shape, self.rate
        if s >= b:
            return math.inf
        return a * s / (b * (b - s))

    def cumulant_derivative_inverse(self, target, tol=DEFAULT_ROOT_TOL):
        if target < 0:
            raise ValueError("target must be nonnegative")
        a, b = self.shape, self.rate
        return b**2 * target / (b * target + a)


@dataclass(frozen=True, eq=False)
class EmpiricalVolume(GrainVolumeLaw):
    """Volume law given by a discrete measure (atom sums throughout)."""

    atoms: DiscreteMeasure

    @property
    def finite_mass(self):
        return self.atoms.total_mass_finite

    def total_mass(self):
        return self.atoms.moment(0)

    def mean(self):
        return self.atoms.moment(1)

    def second_moment(self):
        return self.atoms.moment(2)

    def cumulant_derivative(self, s):
        return cumulant_derivative(self.atoms, s)

    def cumulant_derivative_inverse(self, target, tol=DEFAULT_ROOT_TOL):
        return cumulant_derivative_inverse(self.atoms, target, tol)

    def __eq__(self, other):
        return isinstance(other, EmpiricalVolume) and self.atoms == other.atoms


def volume_law_for(spec):
    """Parametric volume law implied by a model's grain, where one exists.

    Deterministic grains map to point masses.  A random-ball grain in d = 1
    with an exponential or gamma radius maps to the corresponding law of the
    doubled radius (exact for the untruncated law; truncation makes it an
    approximation, flagged through ``grain.is_exact``).  Returns None when no
    parametric form is available.
    """
    grain = spec.grain
    d = spec.dimension
    if isinstance(grain, (_sim.FixedBall, _sim.FixedInterval, _sim.FixedBox)):
        return PointMassVolume(grain.mean_volume(d))
    if isinstance(grain, _sim.RandomBall) and d == 1:
        dist = grain.radius_dist
        name = getattr(getattr(dist, "dist", None), "name", None)
        kwds = dict(getattr(dist, "kwds", {}))
        args = getattr(dist, "args", ())
        if kwds.get("loc", 0) == 0:
            scale = float(kwds.get("scale", 1.0))
            if name == "expon" and not args:
                return ExponentialVolume(rate=1.0 / (2.0 * scale))
            if name == "gamma" and len(args) == 1:
                return GammaVolume(shape=float(args[0]), rate=1.0 / (2.0 * scale))
    return None


# ---------------------------------------------------------------------------
# stationary jump measure (Monte Carlo atomization)


def _clipped_volume_samples(spec, window, n_samples, seed, overlap_points):
    rng = np.random.default_rng(seed)
    d = spec.dimension
    dilated = window.dilate(spec.grain.half_extents(d))
    centers = dilated.uniform(n_samples, rng)
    params = spec.grain.sample_params(n_samples, d, rng)
    u = _sim.clipped_volumes(spec.grain.kind, centers, params, window, overlap_points)
    u = u[u > 0.0]
    base_weight = spec.germ_intensity * dilated.volume / n_samples
    return u, base_weight


def stationary_grain_measure(spec, window, n_samples, seed, overlap_points=256):
    """Monte Carlo atomization of the law of clipped grain volumes.

    Each sampled grain (germ uniform on the support-dilated window) with a
    positive clipped volume u contributes an atom of mass
    germ_intensity * vol(dilated) / n_samples, so the first moment converges
    to the mean total clipped intensity.  Deterministic for a fixed seed.
    """
    if spec.germ_intensity == 0 or spec.gamma1() == 0:
        return DiscreteMeasure.zero()
    u, base_weight = _clipped_volume_samples(spec, window, n_samples, seed, overlap_points)
    return DiscreteMeasure(u, np.full(u.shape, base_weight))


def stationary_jump_measure(spec, window, n_samples, seed, overlap_points=256):
    """Jump measure of the covered-volume bound for a stationary model.

    The stationary covering discount is the constant exprel_neg(gamma1)
    = (1 - exp(-gamma1)) / gamma1 <= 1, applied atomwise to the clipped
    grain-volume measure; its first moment converges to
    volume_fraction * vol(window).
    """
    nu = stationary_grain_measure(spec, window, n_samples, seed, overlap_points)
    if nu.is_zero:
        return nu
    return nu.scaled_weights(exprel_neg(spec.gamma1()))
