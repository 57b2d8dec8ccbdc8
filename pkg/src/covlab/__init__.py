"""covlab: Monte Carlo laboratory for effective-rank bounds on the operator
norm error of sample covariance operators."""

from .geometry import NormGeometry, vector_norm
from .models import (
    CovarianceModel,
    EffectiveRankResult,
    UndefinedRankError,
    build_model,
    build_model_from_spec,
    effective_rank,
)
from .opnorm import OpNormResult, operator_norm, operator_norm_deviation, sample_covariance
from .sampling import SampleBatch, sample, sample_gaussian, sample_rademacher_series
from .bounds import (
    BoundReport,
    BoundSpec,
    confidence_bound,
    eval_bound,
    fixed_point_delta,
    load_constants,
    save_constants,
)
from .experiments import (
    ConcentrationFit,
    DeviationStats,
    ScalingFit,
    ScalingResult,
    empirical_orlicz_norm,
    fit_concentration,
    lp_moment,
    median_mean_gap,
    run_deviation_mc,
    verify_expectation_scaling,
    verify_lower_bound_large_r,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
