"""
Audio and feature models
"""
from dataclasses import dataclass, field

import numpy as np

from app.core.errors import ConfigError, DataError
from app.models.enums import Constants
from app.utils.validators import (
    first_error,
    validate_count,
    validate_finite,
    validate_positive,
    validate_range,
)


@dataclass
class AudioClip:
    """Mono audio, amplitudes nominally in [-1, 1]"""

    samples: np.ndarray
    sample_rate: int = Constants.SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)

        error = first_error(
            validate_positive("sample_rate", self.sample_rate),
            validate_finite("samples", self.samples),
        )
        if error:
            raise DataError(error)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)

    def slice_seconds(self, start_s: float, end_s: float) -> 'AudioClip':
        """Extract [start_s, end_s) clamped to the clip bounds"""
        start = max(int(round(start_s * self.sample_rate)), 0)
        end = min(int(round(end_s * self.sample_rate)), len(self.samples))
        return AudioClip(self.samples[start:max(end, start)].copy(), self.sample_rate)


@dataclass(frozen=True)
class PcenConfig:
    """
    Per-channel energy normalization constants

    Defaults follow the trainable-frontend PCEN reference values.
    """

    smoother_coeff: float = 0.025
    gain_exponent: float = 0.98
    bias: float = 2.0
    root: float = 0.5
    floor: float = 1e-6

    def __post_init__(self):
        error = first_error(
            validate_range("smoother_coeff", self.smoother_coeff, 0.0, 1.0, low_inclusive=False),
            validate_range("gain_exponent", self.gain_exponent, 0.0, 1.0, low_inclusive=False),
            validate_range("bias", self.bias, 0.0, float("inf"), high_inclusive=False),
            validate_range("root", self.root, 0.0, 1.0, low_inclusive=False),
            validate_positive("floor", self.floor),
        )
        if error:
            raise ConfigError(error)


@dataclass(frozen=True)
class FeatureConfig:
    """Spectrogram geometry and PCEN parameters"""

    sample_rate: int = Constants.SAMPLE_RATE
    window_ms: float = Constants.WINDOW_MS
    hop_ms: float = Constants.HOP_MS
    fft_size: int = Constants.FFT_SIZE
    n_mels: int = Constants.N_MELS
    fmin: float = Constants.FMIN
    fmax: float = Constants.FMAX
    pcen: PcenConfig = field(default_factory=PcenConfig)

    def __post_init__(self):
        error = first_error(
            validate_positive("sample_rate", self.sample_rate),
            validate_positive("window_ms", self.window_ms),
            validate_positive("hop_ms", self.hop_ms),
            validate_count("fft_size", self.fft_size),
            validate_count("n_mels", self.n_mels),
            validate_range("fmin", self.fmin, 0.0, self.fmax, high_inclusive=False),
            validate_range("fmax", self.fmax, self.fmin, self.sample_rate / 2, low_inclusive=False),
        )
        if error:
            raise ConfigError(error)

        hop = self.hop_ms * self.sample_rate / 1000.0
        if abs(hop - round(hop)) > 1e-9:
            raise ConfigError(
                f"hop_ms * sample_rate / 1000 must be integral, got {hop}"
            )

        if self.win_samples > self.fft_size:
            raise ConfigError(
                f"window of {self.win_samples} samples exceeds fft_size {self.fft_size}"
            )

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_ms * self.sample_rate / 1000.0))

    @property
    def win_samples(self) -> int:
        return int(round(self.window_ms * self.sample_rate / 1000.0))

    def frames_for(self, n_samples: int) -> int:
        """Frame count of a clip with ``n_samples`` samples"""
        return n_samples // self.hop_samples + 1

    def to_dict(self) -> dict:
        return {
            'sample_rate': self.sample_rate,
            'window_ms': self.window_ms,
            'hop_ms': self.hop_ms,
            'fft_size': self.fft_size,
            'n_mels': self.n_mels,
            'fmin': self.fmin,
            'fmax': self.fmax,
            'pcen': {
                'smoother_coeff': self.pcen.smoother_coeff,
                'gain_exponent': self.pcen.gain_exponent,
                'bias': self.pcen.bias,
                'root': self.pcen.root,
                'floor': self.pcen.floor,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'FeatureConfig':
        data = dict(data)
        pcen = PcenConfig(**data.pop('pcen', {}))
        return cls(pcen=pcen, **data)


@dataclass
class FeatureMatrix:
    """n_mels x n_frames PCEN feature matrix"""

    values: np.ndarray
    hop_ms: float = Constants.HOP_MS
    origin_time_s: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {self.values.shape}")

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]
