"""Multimodal place recognition with sensor- and feature-level group sparsity.

Descriptors from several sensors are stacked per image, a weight matrix
regressing scenario membership is learned under two nested group-norm
penalties, and the block norms of that matrix weight a per-modality
similarity score.
"""
from .config import PipelineConfig
from .errors import (
    DegenerateModelError,
    IngestionError,
    ModelFileError,
    OmniplaceError,
    OutputError,
    SingularityError,
    SolverError,
    ValidationError,
)
from .features import DescriptorConfig, extract_all
from .matching import ModalityWeights, extract_weights, match, score_matrix
from .model import FeatureMatrix, Hyperparams, ModalityLayout, ScenarioLabels, WeightMatrix, objective
from .solver import SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "DegenerateModelError",
    "DescriptorConfig",
    "FeatureMatrix",
    "Hyperparams",
    "IngestionError",
    "ModalityLayout",
    "ModalityWeights",
    "ModelFileError",
    "OmniplaceError",
    "OutputError",
    "PipelineConfig",
    "ScenarioLabels",
    "SingularityError",
    "SolverConfig",
    "SolverError",
    "ValidationError",
    "WeightMatrix",
    "extract_all",
    "extract_weights",
    "match",
    "objective",
    "score_matrix",
    "solve",
]
