"""
Frontend Service - PCEN mel-spectrogram features
"""
import logging
import warnings

import librosa
import numpy as np
import scipy.signal

from app.core.errors import ConfigError, DomainError, EmptyInputError, NumericError
from app.models.audio import AudioClip, FeatureConfig, FeatureMatrix, PcenConfig

logger = logging.getLogger(__name__)


# ==================== MEL STAGE ====================

def mel_energies(clip: AudioClip, cfg: FeatureConfig) -> np.ndarray:
    """
    Mel filterbank energies of a clip

    Frames are centered with zero padding at both edges, so a clip of n
    samples yields ``n // hop + 1`` frames (1.5 s at 16 kHz -> 151).

    Args:
        clip: Mono audio at ``cfg.sample_rate``
        cfg: Feature configuration

    Returns:
        n_mels x n_frames array of power-spectrum energies (>= 0)

    Raises:
        ConfigError: Sample rate mismatch
        EmptyInputError: Clip shorter than one hop
    """
    _check_rate(clip, cfg)

    if len(clip) < cfg.hop_samples:
        raise EmptyInputError(
            f"clip of {len(clip)} samples is shorter than one hop ({cfg.hop_samples})",
            payload={'samples': len(clip)}
        )

    with warnings.catch_warnings():
        # n_fft larger than very short clips
        warnings.simplefilter("ignore", UserWarning)
        energies = librosa.feature.melspectrogram(
            y=clip.samples,
            sr=cfg.sample_rate,
            n_fft=cfg.fft_size,
            hop_length=cfg.hop_samples,
            win_length=cfg.win_samples,
            window='hann',
            center=True,
            pad_mode='constant',
            power=2.0,
            n_mels=cfg.n_mels,
            fmin=cfg.fmin,
            fmax=cfg.fmax,
        )

    # FFT round-off can leave tiny negatives in silent regions
    return np.maximum(energies, 0.0)


def mel_center_frequencies(cfg: FeatureConfig) -> np.ndarray:
    """Peak frequency (Hz) of each triangular mel filter"""
    return librosa.mel_frequencies(n_mels=cfg.n_mels + 2, fmin=cfg.fmin, fmax=cfg.fmax)[1:-1]


# ==================== PCEN ====================

def pcen(energies: np.ndarray, cfg: PcenConfig) -> FeatureMatrix:
    """
    Per-channel energy normalization

    M(t) = (1 - s) M(t-1) + s E(t) with M(0) = E(0), then
    (E / (eps + M)^alpha + delta)^r - delta^r per cell.

    Args:
        energies: n_mels x n_frames nonnegative energies
        cfg: PCEN constants

    Returns:
        FeatureMatrix with nonnegative entries

    Raises:
        DomainError: Negative energy
        NumericError: Non-finite output

    Examples:
        >>> pcen(np.ones((40, 5)), PcenConfig(smoother_coeff=1.0)).values[0, 0]
        0.3178...
    """
    energies = np.asarray(energies, dtype=np.float64)
    if energies.ndim != 2:
        raise DomainError(f"energies must be 2-D, got shape {energies.shape}")
    if energies.size == 0:
        raise EmptyInputError("energy matrix is empty")
    if np.any(energies < 0):
        raise DomainError("PCEN input energies must be nonnegative")

    s = cfg.smoother_coeff
    # Steady state for the first frame so the smoother starts at M(0) = E(0)
    zi = scipy.signal.lfilter_zi([s], [1.0, s - 1.0])[None, :] * energies[:, :1]

    values = librosa.pcen(
        energies,
        b=s,
        gain=cfg.gain_exponent,
        bias=cfg.bias,
        power=cfg.root,
        eps=cfg.floor,
        max_size=1,
        zi=zi,
        axis=-1,
    )

    if not np.all(np.isfinite(values)):
        raise NumericError("PCEN produced non-finite values")

    return FeatureMatrix(np.maximum(values, 0.0))


# ==================== PIPELINE ====================

def featurize(clip: AudioClip, cfg: FeatureConfig) -> FeatureMatrix:
    """
    PCEN mel features of a clip (pure, deterministic)

    Examples:
        >>> featurize(AudioClip(np.zeros(24000)), FeatureConfig()).shape
        (40, 151)
    """
    features = pcen(mel_energies(clip, cfg), cfg.pcen)
    features.hop_ms = cfg.hop_ms
    return features


def log_mel(clip: AudioClip, cfg: FeatureConfig) -> FeatureMatrix:
    """Debug log-mel features, log(eps + E); not used by the model pipeline"""
    energies = mel_energies(clip, cfg)
    return FeatureMatrix(np.log(cfg.pcen.floor + energies), hop_ms=cfg.hop_ms)


def _check_rate(clip: AudioClip, cfg: FeatureConfig):
    if clip.sample_rate != cfg.sample_rate:
        raise ConfigError(
            f"clip sample rate {clip.sample_rate} does not match feature config {cfg.sample_rate}",
            payload={'clip_rate': clip.sample_rate, 'config_rate': cfg.sample_rate}
        )
