"""Experiment scaffold: configuration, pipelines, evaluation, persistence and CLI."""

from .config import ConfigError, ExperimentConfig, default_config, load_config, parse_config
from .evaluation import EvaluationReport, crossval, emit_report, evaluate, stratified_kfold
from .persistence import SchemaError, VersionError, load_model, save_model
from .pipeline import METHODS, PipelineError, TrainedModel, predict_images, train_on_dataset

__all__ = [
    "ConfigError",
    "EvaluationReport",
    "ExperimentConfig",
    "METHODS",
    "PipelineError",
    "SchemaError",
    "TrainedModel",
    "VersionError",
    "crossval",
    "default_config",
    "emit_report",
    "evaluate",
    "load_config",
    "load_model",
    "parse_config",
    "predict_images",
    "save_model",
    "stratified_kfold",
    "train_on_dataset",
]
