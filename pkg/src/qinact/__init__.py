"""Quantile regression for the inactivity time of right-censored data.

The inactivity time at a conditioning point t0 is the time already lost by
subjects whose event happened before t0. This package fits log-linear
quantile regression models for it under right censoring (inverse
probability-of-censoring weighted check loss), quantifies uncertainty by
multiplier perturbation and influence-function covariance estimates, and
ships a seeded Monte-Carlo engine plus a CLI.
"""

from . import errors
from .dataset import (Dataset, ModelConfig, SurvivalRecord, ValidationReport,
                      dump_csv, load_dataset, validate)
from .inference import (GammaEstimate, InferenceReport, PerturbationEnsemble,
                        covariance_from_ensemble, cross_quantile_gamma,
                        estimate_gamma, global_test,
                        influence_function_censoring, percentile_intervals,
                        perturb_fit, wald_report)
from .km import StepFunction, fit_censoring_km, fit_weighted_censoring_km
from .model import (FitResult, compute_ipcw_weights, estimating_equation, fit,
                    predict_quantile_inactivity)
from .qreg import (QRProblem, QRSolution, check_loss, optimality_gap, psi,
                   solve)
from .simulate import (SimCell, SimConfig, SimulationTable, WeibullPHSpec,
                       calibrate_censoring_interval, generate_weibull_ph,
                       run_power_study, run_simulation, true_median_inactivity)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "ModelConfig", "SurvivalRecord", "ValidationReport",
    "load_dataset", "dump_csv", "validate",
    "StepFunction", "fit_censoring_km", "fit_weighted_censoring_km",
    "QRProblem", "QRSolution", "check_loss", "psi", "solve", "optimality_gap",
    "FitResult", "compute_ipcw_weights", "fit", "estimating_equation",
    "predict_quantile_inactivity",
    "PerturbationEnsemble", "InferenceReport", "GammaEstimate",
    "perturb_fit", "covariance_from_ensemble", "percentile_intervals",
    "wald_report", "influence_function_censoring", "estimate_gamma",
    "cross_quantile_gamma", "global_test",
    "WeibullPHSpec", "SimConfig", "SimCell", "SimulationTable",
    "true_median_inactivity", "generate_weibull_ph",
    "calibrate_censoring_interval", "run_simulation", "run_power_study",
    "errors",
]
