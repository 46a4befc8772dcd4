"""
Training models
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.errors import ConfigError, DataError
from app.models.audio import AudioClip, FeatureMatrix
from app.models.network import Weights
from app.utils.validators import first_error, validate_count, validate_positive, validate_range


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings"""

    batch_size: int = 64
    lr_initial: float = 0.001
    lr_final: float = 0.0003
    lr_drop_patience: int = 3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_epochs: int = 30
    max_steps: Optional[int] = None
    seed: int = 0
    data_fraction: float = 1.0

    def __post_init__(self):
        error = first_error(
            validate_count("batch_size", self.batch_size),
            validate_positive("lr_initial", self.lr_initial),
            validate_positive("lr_final", self.lr_final),
            validate_count("lr_drop_patience", self.lr_drop_patience),
            validate_range("adam_beta1", self.adam_beta1, 0.0, 1.0, high_inclusive=False),
            validate_range("adam_beta2", self.adam_beta2, 0.0, 1.0, high_inclusive=False),
            validate_positive("adam_eps", self.adam_eps),
            validate_count("max_epochs", self.max_epochs),
            validate_count("seed", self.seed, minimum=0),
            validate_range("data_fraction", self.data_fraction, 0.0, 1.0, low_inclusive=False),
        )
        if not error and self.max_steps is not None:
            error = first_error(validate_count("max_steps", self.max_steps))
        if error:
            raise ConfigError(error)

        if self.lr_final > self.lr_initial:
            raise ConfigError(
                f"lr_final ({self.lr_final}) must not exceed lr_initial ({self.lr_initial})"
            )


@dataclass
class AdamState:
    """First/second moment accumulators keyed by tensor name"""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_weights(cls, weights: Weights) -> 'AdamState':
        return cls(
            m={name: np.zeros(value.shape, dtype=np.float64) for name, value in weights.items()},
            v={name: np.zeros(value.shape, dtype=np.float64) for name, value in weights.items()},
            t=0,
        )


@dataclass
class LabeledExample:
    """One training window and its binary label (1 = keyword inside)"""

    features: FeatureMatrix
    label: int
    source: Optional[str] = None
    snr_db: Optional[float] = None
    shift_ms: Optional[float] = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")


@dataclass
class ManifestRecord:
    """
    One JSONL manifest line

    ``span_s`` is the aligned keyword span inside the file, ``spans_s`` lists
    every keyword of a long evaluation file, ``offset_s`` is the window start
    for mined negatives.
    """

    path: str
    label: Optional[str] = None
    kind: str = "example"
    split: str = "train"
    span_s: Optional[Tuple[float, float]] = None
    spans_s: Optional[List[Tuple[float, float]]] = None
    offset_s: Optional[float] = None
    score: Optional[float] = None
    extra: Dict[str, object] = field(default_factory=dict)

    @property
    def keyword_spans(self) -> List[Tuple[float, float]]:
        if self.spans_s is not None:
            return [tuple(span) for span in self.spans_s]
        if self.span_s is not None and self.label == "positive":
            return [tuple(self.span_s)]
        return []

    @property
    def target(self) -> int:
        return 1 if self.label == "positive" else 0

    def to_dict(self) -> dict:
        rv = {'path': self.path}
        if self.kind != "example":
            rv['kind'] = self.kind
        if self.label is not None:
            rv['label'] = self.label
        if self.split != "train":
            rv['split'] = self.split
        if self.span_s is not None:
            rv['span_s'] = [float(self.span_s[0]), float(self.span_s[1])]
        if self.spans_s is not None:
            rv['spans_s'] = [[float(b), float(e)] for b, e in self.spans_s]
        if self.offset_s is not None:
            rv['offset_s'] = float(self.offset_s)
        if self.score is not None:
            rv['score'] = float(self.score)
        rv.update(self.extra)
        return rv


@dataclass
class EpochMetrics:
    """One row of the metrics log"""

    epoch: int
    step: int
    train_loss: float
    dev_loss: float
    lr: float

    def to_row(self) -> list:
        return [self.epoch, self.step, f"{self.train_loss:.8f}", f"{self.dev_loss:.8f}", f"{self.lr:.8g}"]


@dataclass
class TrainingWindow:
    """
    Window-length raw audio ready for augmentation

    ``span_s`` is the keyword span relative to the window start (positives
    only); augmentation uses it to relabel jittered copies.
    """

    clip: AudioClip
    label: int
    span_s: Optional[Tuple[float, float]] = None
    source: Optional[str] = None
