"""Laplace noise calibration for pufferfish privacy."""

from pufferfish.audit import AuditReport, LaplaceNoise, audit_analytic, audit_empirical, laplace_sample
from pufferfish.calibrate import (
    CalibrationResult,
    DiscriminativePair,
    PrivacyBudget,
    UserPopulation,
    calibrate_gaussian,
    calibrate_gmm,
    calibrate_sum_presence,
    calibrate_sum_value,
    calibrate_translation,
)
from pufferfish.errors import PufferfishError
from pufferfish.gaussian_ot import Gaussian1D, monge_map, w2_squared
from pufferfish.gmm import Gmm1D, PriorBelief, fit_em
from pufferfish.gmm_ot import TransportPlan, solve_transport
from pufferfish.specfun import TauMethod, tau_star

__all__ = [
    "AuditReport",
    "CalibrationResult",
    "DiscriminativePair",
    "Gaussian1D",
    "Gmm1D",
    "LaplaceNoise",
    "PriorBelief",
    "PrivacyBudget",
    "PufferfishError",
    "TauMethod",
    "TransportPlan",
    "UserPopulation",
    "audit_analytic",
    "audit_empirical",
    "calibrate_gaussian",
    "calibrate_gmm",
    "calibrate_sum_presence",
    "calibrate_sum_value",
    "calibrate_translation",
    "fit_em",
    "laplace_sample",
    "monge_map",
    "solve_transport",
    "tau_star",
    "w2_squared",
]
