"""
Streaming evaluation models
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.errors import ConfigError, DataError
from app.models.enums import Constants
from app.utils.validators import first_error, validate_positive, validate_range


@dataclass(frozen=True)
class StreamConfig:
    """Sliding window geometry and decision rule"""

    window_s: float = Constants.WINDOW_S
    hop_s: float = Constants.HOP_S
    threshold: float = 0.5
    refractory_s: float = 1.0
    tolerance_s: float = Constants.MATCH_TOLERANCE_S

    def __post_init__(self):
        error = first_error(
            validate_positive("window_s", self.window_s),
            validate_positive("hop_s", self.hop_s),
            validate_range("threshold", self.threshold, 0.0, float("inf"), high_inclusive=False),
            validate_range("refractory_s", self.refractory_s, 0.0, float("inf"), high_inclusive=False),
            validate_range("tolerance_s", self.tolerance_s, 0.0, float("inf"), high_inclusive=False),
        )
        if error:
            raise ConfigError(error)

        if self.hop_s > self.window_s:
            raise ConfigError(f"hop_s ({self.hop_s}) must not exceed window_s ({self.window_s})")

    def window_samples(self, sample_rate: int) -> int:
        return int(round(self.window_s * sample_rate))

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(self.hop_s * sample_rate))


@dataclass(frozen=True)
class EvalCondition:
    """
    Degradation applied to every evaluation recording before scoring

    ``snr_db`` mixes a noise recording in at that SNR, ``rir`` convolves
    with a room impulse response first. The default is the clean set.

    Examples:
        >>> EvalCondition.from_snr(-5.0).name
        'snr-5'
    """

    name: str = "clean"
    snr_db: Optional[float] = None
    rir: bool = False

    @classmethod
    def from_snr(cls, snr_db: float) -> 'EvalCondition':
        return cls(name=f"snr{snr_db:g}", snr_db=float(snr_db))

    @classmethod
    def far_field(cls) -> 'EvalCondition':
        return cls(name="rir", rir=True)

    @property
    def is_clean(self) -> bool:
        return self.snr_db is None and not self.rir


CLEAN = EvalCondition()


@dataclass(frozen=True)
class DetectionEvent:
    """Keyword detection at a window end time"""

    time_s: float
    score: float

    def to_dict(self) -> dict:
        return {'time_s': round(self.time_s, 6), 'score': float(self.score)}


@dataclass
class ScoreTrack:
    """Window end times and keyword scores of one file"""

    times_s: np.ndarray
    scores: np.ndarray
    source: Optional[str] = None

    def __post_init__(self):
        self.times_s = np.asarray(self.times_s, dtype=np.float64).reshape(-1)
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if self.times_s.shape != self.scores.shape:
            raise DataError(
                f"{self.times_s.size} window times but {self.scores.size} scores"
            )

    def __len__(self) -> int:
        return int(self.scores.size)

    def pairs(self) -> List[Tuple[float, float]]:
        return list(zip(self.times_s.tolist(), self.scores.tolist()))


@dataclass
class GroundTruth:
    """Keyword spans of one file plus its keyword-free audio duration"""

    spans: List[Tuple[float, float]] = field(default_factory=list)
    total_negative_audio_s: float = 0.0

    def __post_init__(self):
        self.spans = sorted((float(b), float(e)) for b, e in self.spans)
        for begin, end in self.spans:
            if begin > end:
                raise DataError(f"keyword span [{begin}, {end}] has begin after end")
        for (_, prev_end), (next_begin, _) in zip(self.spans, self.spans[1:]):
            if next_begin < prev_end:
                raise DataError("keyword spans must not overlap")
        if self.total_negative_audio_s < 0:
            raise DataError("total_negative_audio_s must be >= 0")

    @property
    def n_keywords(self) -> int:
        return len(self.spans)


@dataclass
class MatchResult:
    """Hit/miss/false-alarm counts with the negative audio they were measured on"""

    hits: int = 0
    misses: int = 0
    false_alarms: int = 0
    negative_audio_s: float = 0.0

    def __add__(self, other: 'MatchResult') -> 'MatchResult':
        return MatchResult(
            hits=self.hits + other.hits,
            misses=self.misses + other.misses,
            false_alarms=self.false_alarms + other.false_alarms,
            negative_audio_s=self.negative_audio_s + other.negative_audio_s,
        )

    @property
    def n_keywords(self) -> int:
        return self.hits + self.misses

    @property
    def frr_percent(self) -> float:
        if self.n_keywords == 0:
            return 0.0
        return 100.0 * self.misses / self.n_keywords

    @property
    def fa_per_hour(self) -> float:
        if self.negative_audio_s <= 0:
            return 0.0
        return self.false_alarms / (self.negative_audio_s / 3600.0)


@dataclass(frozen=True)
class OperatingPoint:
    """
    One DET point

    ``fa_per_hour`` and ``frr_percent`` are the monotone curve values; the
    raw fields hold what detection and matching measured at exactly this
    threshold (None when they equal the curve values).
    """

    threshold: float
    fa_per_hour: float
    frr_percent: float
    raw_fa_per_hour: Optional[float] = None
    raw_frr_percent: Optional[float] = None

    @property
    def measured(self) -> Tuple[float, float]:
        fa = self.fa_per_hour if self.raw_fa_per_hour is None else self.raw_fa_per_hour
        frr = self.frr_percent if self.raw_frr_percent is None else self.raw_frr_percent
        return fa, frr

    def to_row(self) -> list:
        raw_fa, raw_frr = self.measured
        return [
            f"{self.threshold:.8g}",
            f"{self.fa_per_hour:.6f}",
            f"{self.frr_percent:.6f}",
            f"{raw_fa:.6f}",
            f"{raw_frr:.6f}",
        ]


@dataclass
class EvalReport:
    """
    DET operating points ordered by decreasing threshold

    ``frr_at_targets`` maps a target FA/hour to the FRR% read off the curve
    (``math.inf`` when no point reaches the target).
    """

    points: List[OperatingPoint] = field(default_factory=list)
    frr_at_targets: Dict[float, float] = field(default_factory=dict)
    window_eer: Optional[float] = None
    condition: str = CLEAN.name

    def accuracy_percent(self, target: float) -> float:
        """100 - FRR% at ``target`` FA/hour"""
        return 100.0 - self.frr_at_targets[target]

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([p.threshold for p in self.points])

    @property
    def fa_per_hour(self) -> np.ndarray:
        return np.array([p.fa_per_hour for p in self.points])

    @property
    def frr_percent(self) -> np.ndarray:
        return np.array([p.frr_percent for p in self.points])

    def summary(self) -> dict:
        """JSON-ready summary (infinite FRR is reported as null)"""
        def finite_or_none(value: float):
            return value if math.isfinite(value) else None

        rv = {
            'condition': self.condition,
            'n_points': len(self.points),
            'frr_at_fa_per_hour': {
                str(target): finite_or_none(frr) for target, frr in self.frr_at_targets.items()
            },
            'accuracy_at_fa_per_hour': {
                str(target): finite_or_none(self.accuracy_percent(target))
                for target in self.frr_at_targets
            },
        }
        if self.window_eer is not None:
            rv['window_eer'] = self.window_eer
        return rv

