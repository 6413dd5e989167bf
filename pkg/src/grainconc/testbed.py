"""Finite-space Monte Carlo verification of the covariance/thinning machinery.

The phase space is a finite set of n <= 12 sites with independent Poisson
counts, so every abstract identity specializes to array arithmetic on count
matrices of shape (n_samples, n).  Test functionals are callables mapping a
count matrix to a vector of values, e.g. ``total_count`` or
``coordinate_indicator(0)``; restricting to bounded or linear functionals
keeps every moment condition satisfied by construction.

The covariance identity under test: Cov(F, G) equals the expectation over
samples of sum_x lambda_x * D_x F * I_x, where D_x adds one point at site x
and I_x is the double integral of D_x g over a t-thinning of the sample plus
an independent Poisson((1-t) * lambda) remainder, t uniform on [0, 1].  The
inner integral is estimated by stratified sampling of t with a fresh
remainder per stratum.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bounds import bound_t2_4
from .kernels import exp_excess
from .simulate import clopper_pearson

__all__ = [
    "FiniteSpace",
    "sample_poisson",
    "t_thinning",
    "total_count",
    "coordinate_indicator",
    "linear_functional",
    "constant_functional",
    "covariance_identity_check",
    "cumulant_bound_check",
    "mecke_bound_check",
    "verification_battery",
    "BatteryRow",
]


@dataclass(frozen=True)
class FiniteSpace:
    """n independent Poisson sites with positive intensities (n <= 12)."""

    lambdas: tuple

    def __post_init__(self):
        lambdas = tuple(float(v) for v in self.lambdas)
        if not 1 <= len(lambdas) <= 12:
            raise ValueError("a finite space has between 1 and 12 sites")
        if any(not v > 0 for v in lambdas):
            raise ValueError("all intensities must be positive")
        object.__setattr__(self, "lambdas", lambdas)

    @property
    def n(self):
        return len(self.lambdas)

    @property
    def arr(self):
        return np.asarray(self.lambdas)


def sample_poisson(space, rng, size=None):
    """Independent Poisson counts; (n,) or (size, n) for batched sampling."""
    if size is None:
        return rng.poisson(space.arr)
    return rng.poisson(space.arr, size=(size, space.n))


def t_thinning(counts, t, rng):
    """Binomial(counts, t) thinning; t = 1 is the identity, t = 0 is zero.

    The kept and dropped parts of a Poisson sample are independent Poisson
    with means t*lambda and (1-t)*lambda.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("retention probability t must lie in [0, 1]")
    return rng.binomial(counts, t)


# test functionals (count matrix (N, n) -> values (N,))


def total_count(counts):
    return counts.sum(axis=-1).astype(float)


def coordinate_indicator(site, min_count=1):
    def f(counts):
        return (counts[..., site] >= min_count).astype(float)

    return f


def linear_functional(weights):
    weights = np.asarray(weights, dtype=float)

    def f(counts):
        return counts @ weights

    return f


def constant_functional(value=1.0):
    def f(counts):
        return np.full(counts.shape[0], float(value))

    return f


# ---------------------------------------------------------------------------
# nested estimators


def _difference_matrix(counts, f):
    """(N, n) matrix of add-one-point differences f(counts + e_x) - f(counts)."""
    base = f(counts)
    out = np.empty(counts.shape, dtype=float)
    work = counts.copy()
    for x in range(counts.shape[1]):
        work[:, x] += 1
        out[:, x] = f(work) - base
        work[:, x] -= 1
    return out


def _inner_integral(counts, g, lam, rng, n_strata):
    """Stratified estimate of the double integral of D_x g, per sample and site.

    For each stratum j the retention probability is uniform on
    [j/S, (j+1)/S] (unbiased), the sample is thinned with it and an
    independent Poisson((1-t) * lambda) remainder is added before the
    difference of g is taken.
    """
    n_samples, n = counts.shape
    acc = np.zeros((n_samples, n))
    for j in range(n_strata):
        t = (j + rng.random(n_samples)) / n_strata
        kept = rng.binomial(counts, t[:, None])
        remainder = rng.poisson((1.0 - t)[:, None] * lam[None, :])
        acc += _difference_matrix(kept + remainder, g)
    return acc / n_strata


def _safe_z(delta, se):
    if se == 0.0:
        return 0.0 if delta == 0.0 else math.inf
    return delta / se


def _two_streams(seed):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return (np.random.default_rng(child) for child in ss.spawn(2))


@dataclass
class IdentityReport:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    z: float


def covariance_identity_check(f, g, space, n_samples, seed, n_strata=32):
    """Standardized gap between the two sides of the covariance identity.

    The left side is the empirical covariance of f and g; the right side is
    the nested estimator described in the module docstring, computed on an
    independent stream so the two standard errors add in quadrature.
    """
    lam = space.arr
    stream_l, stream_r = _two_streams(seed)

    eta = sample_poisson(space, stream_l, n_samples)
    f_vals, g_vals = f(eta), g(eta)
    f_c = f_vals - f_vals.mean()
    g_c = g_vals - g_vals.mean()
    products = f_c * g_c
    lhs = float(products.sum() / (n_samples - 1))
    lhs_se = float(products.std(ddof=1) / math.sqrt(n_samples))

    eta = sample_poisson(space, stream_r, n_samples)
    df = _difference_matrix(eta, f)
    inner = _inner_integral(eta, g, lam, stream_r, n_strata)
    per_sample = (df * inner) @ lam
    rhs = float(per_sample.mean())
    rhs_se = float(per_sample.std(ddof=1) / math.sqrt(n_samples))

    z = _safe_z(lhs - rhs, math.hypot(lhs_se, rhs_se))
    return IdentityReport(lhs, lhs_se, rhs, rhs_se, z)


@dataclass
class CumulantReport:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    passed: bool


def cumulant_bound_check(f, space, s, theta, n_samples, seed, n_nodes=8, n_strata=16):
    """Monte Carlo check that the centered log-MGF obeys its cumulant bound.

    LHS: log E[exp(s * (F - E[F]))].  RHS at mixing weight theta in (0, 1):
    theta / (s * (1 - theta)) times the integral over u in [0, s] of
    log E[exp(s * V(u) / theta)], where V(u) sums (exp(u * D_x F) - 1) times
    the inner double integral over sites.  V's nested noise inflates the RHS
    (Jensen), which only makes the asserted inequality harder to violate by
    chance in the other direction; the check passes when
    LHS <= RHS + 3 * combined SE.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if not s > 0:
        raise ValueError("s must be positive")
    lam = space.arr
    stream_l, stream_r = _two_streams(seed)

    eta = sample_poisson(space, stream_l, n_samples)
    f_vals = f(eta)
    centered = np.exp(s * (f_vals - f_vals.mean()))
    mean_exp = centered.mean()
    lhs = float(math.log(mean_exp))
    se_exp = centered.std(ddof=1) / math.sqrt(n_samples) / mean_exp
    se_mean_f = s * f_vals.std(ddof=1) / math.sqrt(n_samples)
    lhs_se = float(math.hypot(se_exp, se_mean_f))

    eta = sample_poisson(space, stream_r, n_samples)
    df = _difference_matrix(eta, f)
    inner = _inner_integral(eta, f, lam, stream_r, n_strata)
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    nodes = 0.5 * s * (nodes + 1.0)
    weights = 0.5 * s * weights
    prefactor = theta / (s * (1.0 - theta))
    rhs = 0.0
    rhs_var = 0.0
    for u, wt in zip(nodes, weights):
        v = (np.expm1(u * df) * inner) @ lam
        grown = np.exp(s * v / theta)
        mean_grown = grown.mean()
        rhs += wt * math.log(mean_grown)
        node_se = grown.std(ddof=1) / math.sqrt(n_samples) / mean_grown
        rhs_var += (wt * node_se) ** 2
    rhs *= prefactor
    rhs_se = float(prefactor * math.sqrt(rhs_var))

    passed = lhs <= rhs + 3.0 * math.hypot(lhs_se, rhs_se)
    return CumulantReport(lhs, lhs_se, float(rhs), rhs_se, passed)


@dataclass
class MeckeReport:
    r_grid: np.ndarray
    tail_hat: np.ndarray
    ci_low: np.ndarray
    bound: np.ndarray
    passed: bool


def mecke_bound_check(space, weights, r_grid, n_samples, seed, ci_level=0.998):
    """Empirical tail of a nonnegative linear functional vs its T2_4 bound.

    F = sum g_i * N_i with g >= 0 satisfies the linear domination with slope
    a = max(g) and offset 0, so the closed-form bound applies; the check
    asserts the exact-binomial lower limit never exceeds it.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (space.n,) or np.any(weights < 0) or not weights.max() > 0:
        raise ValueError("weights must be nonnegative with a positive maximum")
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    rng = np.random.default_rng(seed)
    f_vals = sample_poisson(space, rng, n_samples) @ weights
    mean_f = float(space.arr @ weights)
    a = float(weights.max())
    counts = (f_vals[None, :] - mean_f >= r_grid[:, None]).sum(axis=1)
    tail = counts / n_samples
    ci_low, _ = clopper_pearson(counts, n_samples, ci_level)
    bound = np.array([bound_t2_4(a, 0.0, mean_f, float(r)) for r in r_grid])
    passed = bool(np.all(ci_low <= bound + 1e-12))
    return MeckeReport(r_grid, tail, ci_low, bound, passed)


# ---------------------------------------------------------------------------
# fixed verification battery


@dataclass(frozen=True)
class BatteryRow:
    name: str
    statistic: float
    threshold: float
    passed: bool


def _z_rows(name, report, analytic=None):
    rows = [BatteryRow(f"{name}_z", abs(report.z), 4.0, abs(report.z) < 4.0)]
    if analytic is not None:
        for side, value, se in (
            ("lhs", report.lhs, report.lhs_se),
            ("rhs", report.rhs, report.rhs_se),
        ):
            stat = abs(_safe_z(value - analytic, se))
            rows.append(BatteryRow(f"{name}_{side}_dev", stat, 3.0, stat < 3.0))
    return rows


def verification_battery(seed, n_samples=100_000, checks=None):
    """Run the fixed verification battery; returns a list of BatteryRow.

    ``checks`` optionally restricts to rows whose name starts with one of the
    given prefixes (e.g. ["cov"] for the covariance-identity subset).
    Deterministic for a fixed seed.
    """
    seeds = np.random.SeedSequence(seed).spawn(10)
    rows = []

    # covariance identity checks
    single2 = FiniteSpace((2.0,))
    rows += _z_rows(
        "cov_linear_single",
        covariance_identity_check(total_count, total_count, single2, n_samples, seeds[0]),
        analytic=2.0,
    )
    rows += _z_rows(
        "cov_constant",
        covariance_identity_check(
            constant_functional(1.0), total_count, FiniteSpace((1.0, 0.5)), n_samples, seeds[1]
        ),
    )
    hit = coordinate_indicator(0)
    var_hit = math.exp(-1.0) * (1.0 - math.exp(-1.0))
    rows += _z_rows(
        "cov_indicator",
        covariance_identity_check(hit, hit, FiniteSpace((1.0,)), n_samples, seeds[2]),
        analytic=var_hit,
    )
    rows += _z_rows(
        "cov_mixed",
        covariance_identity_check(
            total_count,
            coordinate_indicator(0, min_count=2),
            FiniteSpace((1.0, 1.0, 1.0)),
            n_samples,
            seeds[3],
        ),
    )

    # thinning marginals and independence
    rng = np.random.default_rng(seeds[4])
    eta = sample_poisson(FiniteSpace((4.0,)), rng, n_samples)[:, 0]
    kept = t_thinning(eta, 0.5, rng)
    dropped = eta - kept
    for name, values, target in (("kept", kept, 2.0), ("dropped", dropped, 2.0)):
        se = values.std(ddof=1) / math.sqrt(n_samples)
        stat = abs(_safe_z(values.mean() - target, se))
        rows.append(BatteryRow(f"thinning_{name}_mean_dev", stat, 3.0, stat < 3.0))
    prod = (kept - kept.mean()) * (dropped - dropped.mean())
    cov_se = prod.std(ddof=1) / math.sqrt(n_samples)
    stat = abs(_safe_z(prod.mean(), cov_se))
    rows.append(BatteryRow("thinning_independence_dev", stat, 3.0, stat < 3.0))

    # cumulant bounds
    rep = cumulant_bound_check(total_count, FiniteSpace((1.0,)), 0.5, 0.5, n_samples, seeds[5])
    gap = _safe_z(rep.lhs - rep.rhs, math.hypot(rep.lhs_se, rep.rhs_se))
    rows.append(BatteryRow("cumulant_linear_gap", gap, 3.0, rep.passed))
    analytic_lhs = exp_excess(0.5)  # linear unit-increment F: log-MGF = lambda * exp_excess(s)
    stat = abs(_safe_z(rep.lhs - analytic_lhs, rep.lhs_se))
    rows.append(BatteryRow("cumulant_linear_lhs_dev", stat, 3.0, stat < 3.0))
    rep = cumulant_bound_check(
        total_count, FiniteSpace((1.0, 1.0, 1.0)), 0.3, 0.5, n_samples, seeds[6]
    )
    gap = _safe_z(rep.lhs - rep.rhs, math.hypot(rep.lhs_se, rep.rhs_se))
    rows.append(BatteryRow("cumulant_total3_gap", gap, 3.0, rep.passed))

    # Mecke-route tail domination
    unit = mecke_bound_check(
        FiniteSpace((0.6, 0.4)), (1.0, 1.0), (0.5, 1.0, 2.0, 4.0), n_samples, seeds[7]
    )
    exact_bound_at_1 = math.exp(-(1.0 - math.log(2.0)))
    err = abs(unit.bound[np.isclose(unit.r_grid, 1.0)][0] - exact_bound_at_1)
    rows.append(BatteryRow("mecke_unit_bound_value", err, 1e-12, err <= 1e-12))
    worst = float(np.max(unit.ci_low - unit.bound))
    rows.append(BatteryRow("mecke_unit_domination", worst, 0.0, unit.passed))
    weighted = mecke_bound_check(
        FiniteSpace((1.0, 0.5)), (1.0, 2.0), (0.5, 1.0, 2.0, 4.0), n_samples, seeds[8]
    )
    worst = float(np.max(weighted.ci_low - weighted.bound))
    rows.append(BatteryRow("mecke_weighted_domination", worst, 0.0, weighted.passed))

    if checks is not None:
        prefixes = tuple(checks)
        if not prefixes:
            raise ValueError("the battery selection must not be empty")
        rows = [row for row in rows if row.name.startswith(prefixes)]
        if not rows:
            raise ValueError(f"no battery rows match {checks!r}")
    return rows
