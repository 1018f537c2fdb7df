"""Weighted z-differences for covariate balance in propensity-score weighted analyses."""

from .balance import (
    BalanceReport,
    SdResult,
    ZKind,
    ZResult,
    build_report,
    qq_data,
    sd_weighted_binary,
    sd_weighted_continuous,
    z_binary,
    z_continuous_mean,
    z_continuous_mean_pooled,
    z_continuous_variance,
    z_nominal,
    z_ordinal,
)
from .core import (
    CohortSample,
    CovariateColumn,
    Scale,
    ScaledWeights,
    scale_weights,
    sum_sq_weights,
    weighted_mean,
    weighted_variance,
)
from .distributions import chisq_cdf, normal_cdf, normal_quantile
from .errors import BalanceForgeError, DataError, NumericalError, SingularDesignError
from .propensity import PropensityModel, WeightScheme, clip_ps, compute_weights, fit_logistic

__version__ = "0.1.0"
