"""Concentration bounds for covered volumes of germ-grain models.

The package evaluates Chernoff-type upper tail bounds for the volume covered
by a stationary Boolean germ-grain model (and for general Poisson
functionals via the finite-space testbed), and validates them against seeded
Monte Carlo simulation.
"""

from .errors import ConfigError, DomainError
from .kernels import bennett_coeff, exp_excess, exprel_neg
from .measure import (
    DiscreteMeasure,
    EmpiricalVolume,
    ExponentialVolume,
    GammaLevyVolume,
    GammaVolume,
    GrainVolumeLaw,
    PointMassVolume,
    chernoff_exponent,
    cumulant_derivative,
    cumulant_derivative_inverse,
    cumulant_integral,
    stationary_grain_measure,
    stationary_jump_measure,
    volume_law_for,
)
from .bounds import (
    THEOREM_IDS,
    BoundContext,
    StationaryModelSummary,
    TailBoundCurve,
    applicability_error,
    best_bound,
    bound_c3_8,
    bound_c4_2,
    bound_c4_4,
    bound_ex4_5,
    bound_ex4_6,
    bound_p4_8,
    bound_t2_4,
    bound_t3_5,
    bound_t3_7,
    chernoff_optimize,
    evaluate_bound,
    evaluate_curve,
    lipschitz_scale,
)
from .simulate import (
    BooleanModelSpec,
    FixedBall,
    FixedBox,
    FixedInterval,
    RandomBall,
    Realization,
    TailEstimate,
    Window,
    clopper_pearson,
    estimate_tail,
    estimate_volume_fraction,
    exactly_once_volume,
    measure_volume,
    sample_realization,
)
from .testbed import (
    FiniteSpace,
    covariance_identity_check,
    cumulant_bound_check,
    mecke_bound_check,
    sample_poisson,
    t_thinning,
    verification_battery,
)

__version__ = "0.1.0"
