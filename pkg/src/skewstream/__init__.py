"""Streaming anomaly detection over event logs with categorical and skewed continuous attributes."""

from .config import DetectorConfig
from .engine import StreamEngine, anomaly_score, majority_regime, process_window
from .estimator import SkewStreamDetector
from .exceptions import (AlignmentError, ConfigError, EmptyWindowError, InvalidParameterError,
                         InvalidStateError, NumericalError, SkewStreamError,
                         UndefinedMetricError)
from .gamma import GammaPrior, fit_gamma_shape_rate
from .mdl import Case, select_regime
from .sifi import PriorMatrices, carry_priors, decompose, initial_priors, log_likelihood
from .types import (AttributeSchema, CompactDescription, ComponentMatrices, CurrentTensor, Event,
                    Regime, ScoredWindow, SwitchRecord)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "AttributeSchema", "Case", "CompactDescription", "ComponentMatrices",
    "ConfigError", "CurrentTensor", "DetectorConfig", "EmptyWindowError", "Event", "GammaPrior",
    "InvalidParameterError", "InvalidStateError", "NumericalError", "PriorMatrices", "Regime",
    "ScoredWindow", "SkewStreamDetector", "SkewStreamError", "StreamEngine", "SwitchRecord",
    "UndefinedMetricError", "anomaly_score", "carry_priors", "decompose", "fit_gamma_shape_rate",
    "initial_priors", "log_likelihood", "majority_regime", "process_window", "select_regime",
]
