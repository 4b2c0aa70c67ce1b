"""Conformal selection of units whose outcomes exceed thresholds.

Selection is driven by the likelihood ratio F(c | x) / (1 - F(c | x)) of a
working model, with the critical ratio tuned on a calibration sample so
that the empirical false-discovery error stays below a target.
"""

from .core import (DataError, Dataset, LabeledSample, SelectionReport, SelectionTask,
                   ThresholdSpec, load_dataset, split_roles, write_dataset)
from .engine import (NO_CANDIDATE, adjusted_alpha, critical_values, error_fn, likelihood_ratio,
                     optimal_eta, power_fn, select, select_constant, select_varying)
from .quantsel import select_quantile
from .baseline import (ScoreFunction, bh_procedure, cdf_score, clipped_score, conformal_pvalue,
                       cqr_score, jc_select, residual_score, weighted_conformal_pvalue)
from .powermax import (ParamSearchSpace, PowerMaxResult, fit_ensemble_weights,
                       linear_gaussian_family, maximize_power, profile_eta)

__version__ = "0.1.0"
