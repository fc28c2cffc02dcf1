"""Robust neural-ODE classifiers trained with a Pontryagin shooting method."""

from .config import ExperimentConfig
from .dynamics import ControlSchedule, ControlValue, TimeGrid, Trajectory, flow_forward
from .estimator import METHODS, RobustNODEClassifier
from .exceptions import ConfigError, NumericalAbort
from .shooting import ShootingConfig, TrainingHistory, train
from .task import Boundary, ClassTargets, Dataset, PerturbedBatch, generate_dataset, generate_perturbations
from .weights import gibbs_weights, uniform_weights, worst_case_weights

__version__ = "0.1.0"

__all__ = [
    "Boundary", "ClassTargets", "ConfigError", "ControlSchedule", "ControlValue", "Dataset",
    "ExperimentConfig", "METHODS", "NumericalAbort", "PerturbedBatch", "RobustNODEClassifier",
    "ShootingConfig", "TimeGrid", "TrainingHistory", "Trajectory", "flow_forward", "generate_dataset",
    "generate_perturbations", "gibbs_weights", "train", "uniform_weights", "worst_case_weights",
]
