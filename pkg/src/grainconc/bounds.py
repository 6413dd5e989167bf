"""Upper tail bounds P(F - E[F] >= r) for covered-measure functionals.

Each bound family carries an opaque provenance label (``theorem_id``) that
travels with every evaluated curve and CSV row, so comparisons can always be
traced back to the family that produced them.  All families are proven upper
bounds for the tail of the exact model; exponents are accumulated in log
space and exponentiated once.

Labels and what they evaluate:

* ``T3_5``   Chernoff optimization of the jump-measure cumulant.
* ``T3_7``   Integrated inverse growth rate (the convex dual of T3_5).
* ``C3_8_i0/i1/i2``  Bennett-form bounds using the i-th jump-measure moment
  and an essential atom bound ``a``.
* ``C4_2_a`` / ``C4_2_b``  Stationary Bennett forms from the mean
  (= volume fraction times window volume) or the second-moment intensity.
* ``R4_3``   C4_2 specialization for deterministic grain volumes (both
  variants coincide with a = grain volume).
* ``E4_12``  C4_2_a with the always-valid choice a = window volume.
* ``C4_4``   Integrated inverse growth rate of the grain-volume law.
* ``EX4_5`` / ``EX4_6``  Closed forms of C4_4 for gamma-Levy and gamma laws.
* ``P4_8``   Single-coverage route: exp(-c*(r + EF*log(EF/(r+EF)))).
* ``T2_4``   Generic single-coverage form with caller-supplied linear
  domination constants (a, b); P4_8 is its stationary specialization.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError
from .kernels import bennett_coeff
from .measure import (
    DiscreteMeasure,
    GammaLevyVolume,
    GammaVolume,
    PointMassVolume,
    chernoff_exponent,
    cumulant_derivative,
    cumulant_integral,
)

__all__ = [
    "THEOREM_IDS",
    "StationaryModelSummary",
    "TailBoundCurve",
    "BoundContext",
    "chernoff_optimize",
    "bound_t3_5",
    "bound_t3_7",
    "bound_c3_8",
    "bound_c4_2",
    "bound_c4_4",
    "bound_ex4_5",
    "bound_ex4_6",
    "bound_p4_8",
    "bound_t2_4",
    "lipschitz_scale",
    "best_bound",
    "evaluate_bound",
    "evaluate_curve",
    "applicability_error",
]

THEOREM_IDS = (
    "T3_5",
    "T3_7",
    "C3_8_i0",
    "C3_8_i1",
    "C3_8_i2",
    "C4_2_a",
    "C4_2_b",
    "R4_3",
    "E4_12",
    "C4_4",
    "EX4_5",
    "EX4_6",
    "P4_8",
    "T2_4",
)

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class StationaryModelSummary:
    """Derived constants of a stationary model restricted to a window.

    p = 1 - exp(-gamma1) is the volume fraction, mean_F = p * window_volume
    the mean covered volume, and c = gamma1 / mean_F the single-coverage
    rate constant.  Construct through :meth:`from_intensity` or
    :meth:`from_model`; the redundant fields are cross-checked to 1e-12.
    """

    gamma1: float
    gamma2: float
    p: float
    window_volume: float
    mean_f: float
    c: float

    def __post_init__(self):
        if not (0 < self.gamma1 < math.inf):
            raise ValueError("gamma1 must be positive and finite")
        if not self.gamma2 >= 0:
            raise ValueError("gamma2 must be nonnegative")
        if not (0 < self.window_volume < math.inf):
            raise ValueError("window_volume must be positive and finite")
        p = -math.expm1(-self.gamma1)
        if abs(self.p - p) > 1e-12 * p:
            raise ValueError("p must equal 1 - exp(-gamma1)")
        if abs(self.mean_f - p * self.window_volume) > 1e-12 * self.mean_f:
            raise ValueError("mean_f must equal p * window_volume")
        if abs(self.c - self.gamma1 / self.mean_f) > 1e-12 * self.c:
            raise ValueError("c must equal gamma1 / mean_f")

    @classmethod
    def from_intensity(cls, gamma1, gamma2, window_volume):
        if not (0 < gamma1 < math.inf):
            raise ValueError("gamma1 must be positive and finite")
        p = -math.expm1(-gamma1)
        mean_f = p * window_volume
        return cls(gamma1, gamma2, p, window_volume, mean_f, gamma1 / mean_f)

    @classmethod
    def from_model(cls, spec, window):
        return cls.from_intensity(spec.gamma1(), spec.gamma2(), window.volume)


# ---------------------------------------------------------------------------
# generic Chernoff optimizer


def chernoff_optimize(cumulant, s_max, r, tol=1e-10):
    """Minimize cumulant(s) - s*r over (0, s_max); returns (s_star, log_bound).

    The objective is convex with value 0 at s = 0 and +inf beyond s_max, so
    bracket expansion followed by golden-section search is unconditionally
    safe.  When the objective decreases all the way to a finite s_max the
    infimum is taken as the left-endpoint limit.  log_bound is clamped to
    <= 0 since s -> 0 always achieves 0.
    """
    if r <= 0:
        raise ValueError("deviation r must be positive")
    if not s_max > 0:
        raise DomainError("s_max must be positive", limit=s_max)

    def g(s):
        value = cumulant(s)
        return value - s * r if math.isfinite(value) else math.inf

    if math.isfinite(s_max):
        hi = s_max
    else:
        hi = 1.0
        while not math.isfinite(g(hi)) and hi > 1e-12:
            hi /= 2.0
        while g(2.0 * hi) < g(hi) and hi < 1e15:
            hi *= 2.0
        hi *= 2.0

    a, b = 0.0, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol * max(1.0, b):
        if gc <= gd:
            b, d, gd = d, c, gc
            c = b - _INVPHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _INVPHI * (b - a)
            gd = g(d)
    s_star = 0.5 * (a + b)
    value = g(s_star)
    if not math.isfinite(value):
        s_star, value = a, g(a)
    return s_star, min(value, 0.0)


# ---------------------------------------------------------------------------
# bound families


def bound_t3_5(nu_star, s_max, r):
    """Chernoff bound exp(inf_s sum(w * exp_excess(s*u)) - s*r) over (0, s_max)."""
    if nu_star.is_zero:
        raise DomainError("zero jump measure: the functional has no upper deviations", limit=0.0)
    _, log_bound = chernoff_optimize(lambda s: cumulant_integral(nu_star, s), s_max, r)
    return math.exp(log_bound)


def bound_t3_7(nu_star, s_max, r):
    """Dual form exp(-integral of the inverse growth rate over [0, r]).

    Valid for r below the left limit of the growth rate at s_max; outside
    that range a DomainError carrying the limit is raised.
    """
    return math.exp(-chernoff_exponent(nu_star, r, s_max=s_max))


def bound_c3_8(nu_star, a, i, r):
    """Bennett-form bound exp((r/a) * bennett_coeff(a**(i-1) * r / m_i)).

    ``a`` must essentially bound the atom locations of the jump measure and
    the i-th moment m_i must be positive and finite.
    """
    if i not in (0, 1, 2):
        raise ValueError("moment order i must be 0, 1 or 2")
    if not a > 0:
        raise ValueError("atom bound a must be positive")
    if r <= 0:
        raise ValueError("deviation r must be positive")
    m_i = nu_star.moment(i)
    if not (0.0 < m_i < math.inf):
        raise DomainError(f"moment m_{i}={m_i!r} must be positive and finite")
    return math.exp((r / a) * bennett_coeff(a ** (i - 1) * r / m_i))


def bound_c4_2(summary, a, variant, r):
    """Stationary Bennett forms from the mean or the second-moment intensity.

    variant "mean":           exp((r/a) * bennett_coeff(r / mean_f))
    variant "second_moment":  exp((r/a) * bennett_coeff(a*gamma1*r / (mean_f*gamma2)))

    ``a`` must essentially bound the clipped grain volume (the window volume
    is always admissible).  The second variant requires finite gamma2.
    """
    if not a > 0:
        raise ValueError("volume bound a must be positive")
    if r <= 0:
        raise ValueError("deviation r must be positive")
    if variant == "mean":
        z = r / summary.mean_f
    elif variant == "second_moment":
        if not math.isfinite(summary.gamma2):
            raise DomainError("gamma2 is infinite: second-moment variant unavailable")
        z = a * summary.gamma1 * r / (summary.mean_f * summary.gamma2)
    else:
        raise ValueError("variant must be 'mean' or 'second_moment'")
    return math.exp((r / a) * bennett_coeff(z))


def bound_c4_4(summary, law, r):
    """exp(-integral over [0, r] of the law's inverse growth rate at c*u).

    The integrand uses the law's closed-form inverse where one exists;
    adaptive quadrature keeps the exponent error far below 1e-8.
    """
    if r <= 0:
        raise ValueError("deviation r must be positive")
    c = summary.c
    exponent, _ = integrate.quad(
        lambda u: law.cumulant_derivative_inverse(c * u), 0.0, r,
        epsabs=1e-12, epsrel=1e-10, limit=200,
    )
    return math.exp(-exponent)


def bound_ex4_5(alpha, beta, c, r):
    """Closed form of C4_4 for the gamma-Levy volume law:
    exp(-beta*r + (alpha/c) * log(1 + beta*c*r/alpha))."""
    _check_positive(alpha=alpha, beta=beta, c=c, r=r)
    return math.exp(-beta * r + (alpha / c) * math.log1p(beta * c * r / alpha))


def bound_ex4_6(alpha, beta, c, r):
    """Closed form of C4_4 for the gamma volume law:
    exp(-beta*r + ((alpha+1)/c) * (((alpha+beta*c*r)/alpha)**(alpha/(alpha+1)) - 1))."""
    _check_positive(alpha=alpha, beta=beta, c=c, r=r)
    power_term = math.expm1((alpha / (alpha + 1.0)) * math.log1p(beta * c * r / alpha))
    return math.exp(-beta * r + ((alpha + 1.0) / c) * power_term)


def bound_p4_8(summary, r):
    """Single-coverage bound exp(-c * (r + mean_f * log(mean_f / (r + mean_f))))."""
    if r <= 0:
        raise ValueError("deviation r must be positive")
    m = summary.mean_f
    return math.exp(-summary.c * (r - m * math.log1p(r / m)))


def bound_t2_4(a, b, mean_f, r):
    """Generic single-coverage bound with linear domination constants (a, b):

    exp(-(1/a) * (r + M * log(M / (r + M)))) with M = mean_f + b/a.

    M = 0 has no upper deviations and raises a DomainError.
    """
    if not a > 0:
        raise ValueError("domination slope a must be positive")
    if b < 0 or mean_f < 0:
        raise ValueError("b and mean_f must be nonnegative")
    if r <= 0:
        raise ValueError("deviation r must be positive")
    m = mean_f + b / a
    if m == 0:
        raise DomainError("mean_f + b/a = 0: the functional is a.s. constant")
    return math.exp(-(r - m * math.log1p(r / m)) / a)


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive")


def lipschitz_scale(nu_star, s_max, lipschitz_constant):
    """Transform (jump measure, s_max) for a Lipschitz image of the functional.

    Scaling atom locations by the Lipschitz constant and shrinking s_max by
    the same factor turns the T3_5 objective into
    sum(w * exp_excess(c_T * s * u)) - s*r over (0, s_max/c_T), which bounds
    the tail of any c_T-Lipschitz function of the original functional.
    """
    if not lipschitz_constant > 0:
        raise ValueError("the Lipschitz constant must be positive")
    return nu_star.scaled_atoms(lipschitz_constant), s_max / lipschitz_constant


# ---------------------------------------------------------------------------
# evaluated curves


@dataclass(eq=False)
class TailBoundCurve:
    """A bound family evaluated on a deviation grid, with validity interval.

    Bound values lie in [0, 1] (1 is the trivial bound; extreme deviations
    may underflow to 0) and are nonincreasing in r within the validity
    domain.  Points are sorted by r.
    """

    theorem_id: str
    r: np.ndarray
    bound: np.ndarray
    validity: tuple = (0.0, math.inf)

    def __post_init__(self):
        self.r = np.atleast_1d(np.asarray(self.r, dtype=float))
        self.bound = np.atleast_1d(np.asarray(self.bound, dtype=float))
        if self.theorem_id not in THEOREM_IDS:
            raise ValueError(f"unknown theorem id {self.theorem_id!r}")
        if self.r.shape != self.bound.shape:
            raise ValueError("r and bound must have equal length")
        if np.any(self.r <= 0) or np.any(np.diff(self.r) <= 0):
            raise ValueError("r grid must be positive and strictly increasing")
        if np.any(self.bound < 0.0) or np.any(self.bound > 1.0):
            raise ValueError("bound values must lie in [0, 1]")
        inside = (self.r > self.validity[0]) & (self.r < self.validity[1])
        vals = self.bound[inside]
        if vals.size > 1 and np.any(np.diff(vals) > 1e-9):
            raise ValueError("bound values must be nonincreasing within validity")

    def is_valid_at(self, r):
        return self.validity[0] < r < self.validity[1]

    def value_at(self, r):
        idx = np.nonzero(np.isclose(self.r, r, rtol=1e-12, atol=0.0))[0]
        if idx.size == 0:
            raise KeyError(f"r={r!r} is not on this curve's grid")
        return float(self.bound[idx[0]])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "bound", "theorem_id"])
            for r, bound in zip(self.r, self.bound):
                writer.writerow([format(r, ".12g"), format(bound, ".12g"), self.theorem_id])

    @classmethod
    def from_csv(cls, path, validity=(0.0, math.inf)):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:3] != ["r", "bound", "theorem_id"]:
                raise ValueError("expected a CSV with header 'r,bound,theorem_id'")
            rows = [row for row in reader if row]
        ids = {row[2] for row in rows}
        if len(ids) != 1:
            raise ValueError("curve CSV must contain exactly one theorem id")
        r = [float(row[0]) for row in rows]
        bound = [float(row[1]) for row in rows]
        return cls(ids.pop(), np.asarray(r), np.asarray(bound), validity)


def best_bound(curves, r):
    """(theorem_id, value) of the smallest bound among curves valid at r."""
    candidates = []
    for curve in curves:
        if not curve.is_valid_at(r):
            continue
        try:
            candidates.append((curve.value_at(r), curve.theorem_id))
        except KeyError:
            continue
    if not candidates:
        raise ValueError(f"no curve is valid at r={r!r}")
    value, theorem_id = min(candidates)
    return theorem_id, value


# ---------------------------------------------------------------------------
# dispatch by theorem id


@dataclass
class BoundContext:
    """Everything a theorem id may need to evaluate on a model."""

    summary: StationaryModelSummary = None
    law: object = None
    nu_star: DiscreteMeasure = None
    s_max: float = math.inf
    a: float = None
    grain_volume: float = None
    t2_4_ab: tuple = None

    def validity_limit(self, theorem_id):
        if theorem_id == "T3_7" and self.nu_star is not None and not self.nu_star.is_zero:
            if math.isinf(self.s_max):
                return math.inf
            return cumulant_derivative(self.nu_star, self.s_max)
        return math.inf


def applicability_error(theorem_id, ctx):
    """None when the id can evaluate on this context, else a reason string."""
    if theorem_id not in THEOREM_IDS:
        return f"unknown theorem id {theorem_id!r}"
    needs_nu = theorem_id in ("T3_5", "T3_7", "C3_8_i0", "C3_8_i1", "C3_8_i2")
    if needs_nu:
        if ctx.nu_star is None or ctx.nu_star.is_zero:
            return "requires a jump-measure discretization (a grain shape must be given)"
        if theorem_id.startswith("C3_8") and not ctx.a:
            return "requires an essential bound a on the clipped grain volume"
        return None
    if theorem_id == "T2_4":
        if ctx.t2_4_ab is None or ctx.summary is None:
            return "requires caller-supplied domination constants (a, b); use P4_8 for volume models"
        return None
    if ctx.summary is None:
        return "requires a stationary model summary"
    if theorem_id in ("C4_2_a", "C4_2_b") and not ctx.a:
        return "requires an essential bound a on the clipped grain volume"
    if theorem_id == "C4_2_b" and not math.isfinite(ctx.summary.gamma2):
        return "gamma2 is not finite for this model"
    if theorem_id == "R4_3":
        if not (isinstance(ctx.law, PointMassVolume) or ctx.grain_volume):
            return "requires a deterministic grain volume"
        return None
    if theorem_id == "C4_4" and ctx.law is None:
        return "requires a parametric grain-volume law"
    if theorem_id == "EX4_5" and not isinstance(ctx.law, GammaLevyVolume):
        return "requires a gamma-Levy grain-volume law"
    if theorem_id == "EX4_6" and not isinstance(ctx.law, GammaVolume):
        return "requires a gamma (or exponential) grain-volume law"
    return None


def evaluate_bound(theorem_id, ctx, r):
    problem = applicability_error(theorem_id, ctx)
    if problem:
        raise DomainError(f"bound {theorem_id}: {problem}")
    if theorem_id == "T3_5":
        return bound_t3_5(ctx.nu_star, ctx.s_max, r)
    if theorem_id == "T3_7":
        return bound_t3_7(ctx.nu_star, ctx.s_max, r)
    if theorem_id.startswith("C3_8_i"):
        return bound_c3_8(ctx.nu_star, ctx.a, int(theorem_id[-1]), r)
    if theorem_id == "C4_2_a":
        return bound_c4_2(ctx.summary, ctx.a, "mean", r)
    if theorem_id == "C4_2_b":
        return bound_c4_2(ctx.summary, ctx.a, "second_moment", r)
    if theorem_id == "R4_3":
        volume = ctx.grain_volume if ctx.grain_volume else ctx.law.volume
        return bound_c4_2(ctx.summary, volume, "mean", r)
    if theorem_id == "E4_12":
        return bound_c4_2(ctx.summary, ctx.summary.window_volume, "mean", r)
    if theorem_id == "C4_4":
        return bound_c4_4(ctx.summary, ctx.law, r)
    if theorem_id == "EX4_5":
        return bound_ex4_5(ctx.law.shape, ctx.law.rate, ctx.summary.c, r)
    if theorem_id == "EX4_6":
        return bound_ex4_6(ctx.law.shape, ctx.law.rate, ctx.summary.c, r)
    if theorem_id == "P4_8":
        return bound_p4_8(ctx.summary, r)
    if theorem_id == "T2_4":
        a, b = ctx.t2_4_ab
        return bound_t2_4(a, b, ctx.summary.mean_f, r)
    raise ValueError(f"unknown theorem id {theorem_id!r}")


def evaluate_curve(theorem_id, ctx, r_grid):
    """Evaluate one bound family on a deviation grid, clamped to [0, 1]."""
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    limit = ctx.validity_limit(theorem_id)
    values = np.empty(r_grid.shape)
    for i, r in enumerate(r_grid):
        if r < limit:
            values[i] = min(evaluate_bound(theorem_id, ctx, float(r)), 1.0)
        else:
            values[i] = np.nan
    keep = ~np.isnan(values)
    return TailBoundCurve(theorem_id, r_grid[keep], values[keep], validity=(0.0, limit))
