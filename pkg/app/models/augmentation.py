"""
Augmentation models
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from app.core.errors import ConfigError, DataError
from app.utils.validators import first_error, validate_count, validate_finite, validate_interval, validate_positive, validate_range


@dataclass(frozen=True)
class AugmentSpec:
    """
    Augmentation settings

    SNRs are drawn uniformly from ``snr_db_range`` (mean 5 dB for the
    default [-5, 15] interval).
    """

    snr_db_range: Tuple[float, float] = (-5.0, 15.0)
    jitter_max_ms: float = 100.0
    rir_paths: Tuple[str, ...] = field(default_factory=tuple)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'snr_db_range', tuple(float(v) for v in self.snr_db_range))
        object.__setattr__(self, 'rir_paths', tuple(self.rir_paths))

        error = first_error(
            validate_interval("snr_db_range", self.snr_db_range),
            validate_range("jitter_max_ms", self.jitter_max_ms, 0.0, float("inf"), high_inclusive=False),
            validate_count("rng_seed", self.rng_seed, minimum=0),
        )
        if error:
            raise ConfigError(error)


@dataclass
class ImpulseResponse:
    """Room impulse response with a free-form descriptor"""

    samples: np.ndarray
    sample_rate: int
    label: Optional[str] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)

        if self.samples.size == 0:
            raise DataError("impulse response must not be empty")

        error = first_error(
            validate_positive("sample_rate", self.sample_rate),
            validate_finite("impulse response", self.samples),
        )
        if error:
            raise DataError(error)
