"""
Alignment models
"""
from dataclasses import dataclass

import numpy as np

from app.core.errors import ConfigError, DataError, EmptyInputError
from app.utils.validators import first_error, validate_count, validate_finite, validate_positive, validate_range


@dataclass
class CharPosteriorMatrix:
    """Smoothed character occupancy scores p(c_k, t), one row per character"""

    chars: str
    scores: np.ndarray
    frame_rate: float
    origin_time_s: float = 0.0

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2 or self.scores.size == 0:
            raise EmptyInputError(f"posterior matrix must be non-empty 2-D, got shape {self.scores.shape}")

        error = first_error(
            validate_positive("frame_rate", self.frame_rate),
            validate_finite("scores", self.scores),
        )
        if error:
            raise DataError(error)

        if np.any(self.scores < 0):
            raise DataError("posterior scores must be nonnegative")

        if len(self.chars) != self.scores.shape[0]:
            raise DataError(
                f"{len(self.chars)} characters but {self.scores.shape[0]} score rows"
            )

    @property
    def n_chars(self) -> int:
        return self.scores.shape[0]

    @property
    def n_steps(self) -> int:
        return self.scores.shape[1]

    def frame_to_seconds(self, frame: int) -> float:
        return self.origin_time_s + frame / self.frame_rate


@dataclass(frozen=True)
class AlignConfig:
    """Decay heuristic and smoothing settings"""

    alpha: float = 0.5
    n_iter: int = 2
    smooth_window: int = 7
    pad_s: float = 0.1

    def __post_init__(self):
        error = first_error(
            validate_range("alpha", self.alpha, 0.0, 1.0),
            validate_count("n_iter", self.n_iter),
            validate_count("smooth_window", self.smooth_window),
            validate_range("pad_s", self.pad_s, 0.0, float("inf"), high_inclusive=False),
        )
        if error:
            raise ConfigError(error)

        if self.smooth_window % 2 == 0:
            raise ConfigError(f"smooth_window must be odd, got {self.smooth_window}")


@dataclass(frozen=True)
class AlignmentSpan:
    """Keyword begin/end located in a posterior matrix"""

    begin_frame: int
    end_frame: int
    begin_s: float
    end_s: float

    @property
    def ordered(self) -> bool:
        return self.begin_s <= self.end_s

    def to_dict(self) -> dict:
        return {
            'begin_frame': self.begin_frame,
            'end_frame': self.end_frame,
            'begin_s': self.begin_s,
            'end_s': self.end_s,
            'ordered': self.ordered,
        }
