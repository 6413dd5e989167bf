"""Numerically stable scalar kernels shared by every tail bound.

All three helpers accept nonnegative scalars or numpy arrays and return the
same shape.  Boundary conventions match the bound formulas that consume them:
``bennett_coeff(0) == +inf`` and ``exprel_neg(inf) == 0``.
"""

import numpy as np

__all__ = ["exp_excess", "bennett_coeff", "exprel_neg"]

# Below these cutoffs the direct expressions lose relative accuracy to
# cancellation; short Taylor series keep the relative error under ~1e-13.
_EXP_EXCESS_CUTOFF = 1e-3
_BENNETT_CUTOFF = 1e-4


def _prepare(z, name):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(np.isnan(z)):
        raise ValueError(f"{name} requires nonnegative input")
    return z


def _scalar_or_array(out):
    return float(out) if out.ndim == 0 else out


def exp_excess(z):
    """exp(z) - 1 - z.

    Direct evaluation cancels catastrophically near zero, so below 1e-3 the
    Taylor series z^2/2 * (1 + z/3 + z^2/12 + z^3/60) is used instead
    (truncation below 3e-15 relative at the cutoff).  Overflows to +inf.
    """
    z = _prepare(z, "exp_excess")
    small = z < _EXP_EXCESS_CUTOFF
    zs = np.where(small, z, 0.0)
    series = 0.5 * zs * zs * (1.0 + zs / 3.0 + zs * zs / 12.0 + zs**3 / 60.0)
    zb = np.where(small, 1.0, z)
    with np.errstate(over="ignore"):
        direct = np.expm1(zb) - zb
    return _scalar_or_array(np.where(small, series, direct))


def bennett_coeff(z):
    """1 - (1 + z) * log(1 + z) / z for z > 0, with value +inf at z == 0.

    This is -h(z)/z for the Bennett function h(z) = (1+z)log(1+z) - z: the
    optimized Poisson upper-tail exponent at mean m and deviation r equals
    r * bennett_coeff(r/m).  Nonpositive and strictly decreasing on (0, inf).
    """
    z = _prepare(z, "bennett_coeff")
    small = (z > 0) & (z < _BENNETT_CUTOFF)
    zs = np.where(small, z, 0.0)
    series = -0.5 * zs * (1.0 - zs / 3.0 + zs * zs / 6.0)
    zb = np.where(small | (z == 0), 1.0, z)
    direct = 1.0 - (1.0 + zb) * np.log1p(zb) / zb
    out = np.where(z == 0, np.inf, np.where(small, series, direct))
    return _scalar_or_array(out)


def exprel_neg(z):
    """(1 - exp(-z)) / z, extended by continuity: 1 at z == 0, 0 at z == inf.

    Strictly decreasing on [0, inf]; equals the mean of exp(-z*t) over
    t in [0, 1].
    """
    z = _prepare(z, "exprel_neg")
    zb = np.where(z == 0, 1.0, z)
    out = -np.expm1(-zb) / zb
    return _scalar_or_array(np.where(z == 0, 1.0, out))
