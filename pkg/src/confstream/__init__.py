"""Streaming multi-model adaptive conformal prediction."""

from confstream.baselines import OgdBaseline
from confstream.kernels import BACKEND
from confstream.metrics import MetricsReport, StepRecord, build_report
from confstream.mocp import MocpExpert, MocpLearner, mocp_init
from confstream.ocp import OcpParams, SfogdState, best_fixed_alpha, pinball_loss, sfogd_step
from confstream.samocp import Samocp, lifetime, meta_weight_update
from confstream.scoring import CalibrationStore, PredictionSet, ScoreParams, alpha_bar, prediction_set, \
    quantile_threshold, raps_score

__all__ = [
    "BACKEND", "CalibrationStore", "MetricsReport", "MocpExpert", "MocpLearner", "OcpParams", "OgdBaseline",
    "PredictionSet", "Samocp", "ScoreParams", "SfogdState", "StepRecord", "alpha_bar", "best_fixed_alpha",
    "build_report", "lifetime", "meta_weight_update", "mocp_init", "pinball_loss", "prediction_set",
    "quantile_threshold", "raps_score", "sfogd_step",
]
__version__ = "0.1.0"
