"""Tail probabilities of self-normalized sums: localization point, tilt and
saddlepoint machinery, importance-sampling estimators, and the pFDR /
sample-size layer built on the ratio of shifted to unshifted tails."""

from .density import (
    ConditionReport,
    DensityModel,
    DensitySpecError,
    check_conditions,
    from_log_pdf,
    make_cauchy,
    make_gaussian,
    normalization,
    parse_density,
    shift,
)
from .ldp import (
    AsymptoticTail,
    CutoffRule,
    TiltDerivatives,
    TiltSolution,
    cutoff_r,
    exact_tail_asymptotic,
    find_z0,
    moment_asymptotic_check,
    ratio_limit,
    regime_score,
    sigma_from_cutoff,
    solve_tn,
    stationarity_residual,
    tilt_derivatives,
    tilt_logmgf,
    tilt_moments,
)
from .montecarlo import (
    DEFAULT_SEED,
    RatioResult,
    TailEstimate,
    mean_importance_weight,
    naive_tail,
    naive_tail_curve,
    ratio_estimate,
    tilted_sampler,
    tilted_tail,
    tilted_tail_curve,
)
from .multitest import (
    MultitestReport,
    SampleSizeResult,
    StudyPlan,
    pfdr_min,
    required_ratio,
    sample_size_asymptotic,
    sample_size_search,
    simulate_multitest,
)
from .selfnorm import (
    joint_density_mc,
    min_dispersion,
    sample_sphere,
    shao_event,
    t_statistic,
)

__version__ = "0.1.0"

__all__ = [
    "AsymptoticTail",
    "ConditionReport",
    "CutoffRule",
    "DEFAULT_SEED",
    "DensityModel",
    "DensitySpecError",
    "MultitestReport",
    "RatioResult",
    "SampleSizeResult",
    "StudyPlan",
    "TailEstimate",
    "TiltDerivatives",
    "TiltSolution",
    "check_conditions",
    "cutoff_r",
    "exact_tail_asymptotic",
    "find_z0",
    "from_log_pdf",
    "joint_density_mc",
    "make_cauchy",
    "make_gaussian",
    "mean_importance_weight",
    "min_dispersion",
    "moment_asymptotic_check",
    "naive_tail",
    "naive_tail_curve",
    "normalization",
    "parse_density",
    "pfdr_min",
    "ratio_estimate",
    "ratio_limit",
    "regime_score",
    "required_ratio",
    "sample_size_asymptotic",
    "sample_size_search",
    "sample_sphere",
    "shao_event",
    "shift",
    "sigma_from_cutoff",
    "simulate_multitest",
    "solve_tn",
    "stationarity_residual",
    "t_statistic",
    "tilt_derivatives",
    "tilt_logmgf",
    "tilt_moments",
    "tilted_sampler",
    "tilted_tail",
    "tilted_tail_curve",
]
