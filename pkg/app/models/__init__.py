"""
Data Models
"""
from app.models.enums import (
    CellKind,
    Activation,
    ExampleLabel,
    ManifestKind,
    Split,
    Constants
)
from app.models.audio import AudioClip, PcenConfig, FeatureConfig, FeatureMatrix
from app.models.network import ModelConfig, Weights, Checkpoint
from app.models.training import (
    TrainConfig,
    AdamState,
    LabeledExample,
    ManifestRecord,
    EpochMetrics,
    TrainingWindow
)
from app.models.alignment import CharPosteriorMatrix, AlignConfig, AlignmentSpan
from app.models.augmentation import AugmentSpec, ImpulseResponse
from app.models.evaluation import (
    StreamConfig,
    DetectionEvent,
    ScoreTrack,
    GroundTruth,
    MatchResult,
    OperatingPoint,
    EvalReport
)

# Gradients share the Weights container
GradSet = Weights

__all__ = [
    'CellKind',
    'Activation',
    'ExampleLabel',
    'ManifestKind',
    'Split',
    'Constants',
    'AudioClip',
    'PcenConfig',
    'FeatureConfig',
    'FeatureMatrix',
    'ModelConfig',
    'Weights',
    'GradSet',
    'Checkpoint',
    'TrainConfig',
    'AdamState',
    'LabeledExample',
    'ManifestRecord',
    'EpochMetrics',
    'TrainingWindow',
    'CharPosteriorMatrix',
    'AlignConfig',
    'AlignmentSpan',
    'AugmentSpec',
    'ImpulseResponse',
    'StreamConfig',
    'DetectionEvent',
    'ScoreTrack',
    'GroundTruth',
    'MatchResult',
    'OperatingPoint',
    'EvalReport',
]
