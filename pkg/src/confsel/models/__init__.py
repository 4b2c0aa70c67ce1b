"""Working models and covariate-shift weight models."""

from .base import (Basis, FitReport, GaussianLocationModel, LinearGaussianModel,
                   RankDeficientError, WeightModel, SIGMA_FLOOR)
from .linear import (LinearQuantileModel, fit_gaussian_lm, fit_linear_quantile, fit_logistic,
                     logistic_loglik, logistic_score, pinball_loss)
from .mixture import MixtureRegressionModel, fit_mixture_lm
from .gamma import GammaRegressionModel, fit_gamma_glm, gamma_loglik, gamma_score
from .forest import (ForestGaussianModel, ForestParams, NodeListForest, QuantileForest,
                     fit_boosted_stumps, fit_forest, fit_quantile_forest)
from .screening import marginal_correlations, sis_screen
from .io import load_model, save_model, model_from_dict

__all__ = [
    "Basis", "FitReport", "GaussianLocationModel", "LinearGaussianModel", "RankDeficientError",
    "WeightModel", "SIGMA_FLOOR", "LinearQuantileModel", "fit_gaussian_lm", "fit_linear_quantile",
    "fit_logistic", "logistic_loglik", "logistic_score", "pinball_loss", "MixtureRegressionModel",
    "fit_mixture_lm", "GammaRegressionModel", "fit_gamma_glm", "gamma_loglik", "gamma_score",
    "ForestGaussianModel", "ForestParams", "NodeListForest", "QuantileForest",
    "fit_boosted_stumps", "fit_forest", "fit_quantile_forest", "marginal_correlations",
    "sis_screen", "load_model", "save_model", "model_from_dict",
]
