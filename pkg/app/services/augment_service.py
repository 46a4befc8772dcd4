"""
Augment Service - additive noise, timing jitter and far-field convolution
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.signal

from app.core.errors import ConfigError, DegenerateNoiseError, DegenerateSignalError
from app.models.audio import AudioClip, FeatureConfig
from app.models.augmentation import AugmentSpec, ImpulseResponse
from app.models.training import LabeledExample, TrainingWindow
from app.repositories.feature_cache_repository import FeatureCacheRepository
from app.services.frontend_service import featurize
from app.utils.workers import ordered_map

logger = logging.getLogger(__name__)

# Responses up to this length use direct convolution (exact for a delta)
DIRECT_CONVOLUTION_MAX_TAPS = 256


# ==================== RNG ====================

def example_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """
    Generator for one example, independent of scheduling order

    Examples:
        >>> example_rng(0, 1, 7).uniform() == example_rng(0, 1, 7).uniform()
        True
    """
    return np.random.default_rng([seed, epoch, index])


def draw_snr_db(spec: AugmentSpec, rng: np.random.Generator) -> float:
    low, high = spec.snr_db_range
    return float(rng.uniform(low, high)) if high > low else float(low)


# ==================== NOISE ====================

def snr_gain(signal_power: float, noise_power: float, snr_db: float) -> float:
    """
    Noise gain giving ``snr_db`` for the given mean-square powers

    Examples:
        >>> snr_gain(1.0, 1.0, 0.0)
        1.0
        >>> round(snr_gain(1.0, 1.0, 20.0), 12)
        0.1
    """
    if signal_power <= 0:
        raise DegenerateSignalError("signal has zero power")
    if noise_power <= 0:
        raise DegenerateNoiseError("noise has zero power")
    return float(np.sqrt(signal_power / (noise_power * 10.0 ** (snr_db / 10.0))))


def _peak_normalize(samples: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(samples)) if samples.size else 0.0
    if peak > 1.0:
        return samples / peak
    return samples


def mix_at_snr(signal: AudioClip, noise: AudioClip, snr_db: float,
               rng: Optional[np.random.Generator] = None) -> AudioClip:
    """
    Add noise at a target SNR

    A random slice of the noise (offset 0 without ``rng``) is scaled so
    that mean-square signal / scaled noise equals 10^(snr_db/10). Noise
    shorter than the signal is tiled. The sum is rescaled only when a
    sample would exceed 1, which keeps the ratio intact.

    Raises:
        ConfigError: Sample rate mismatch
        DegenerateSignalError: Silent signal
        DegenerateNoiseError: Silent noise slice
    """
    if signal.sample_rate != noise.sample_rate:
        raise ConfigError(
            f"noise sample rate {noise.sample_rate} does not match signal {signal.sample_rate}"
        )

    n = len(signal)
    source = noise.samples
    if len(source) < n:
        source = np.resize(source, n)

    offset = int(rng.integers(0, len(source) - n + 1)) if rng is not None else 0
    segment = source[offset:offset + n]

    gain = snr_gain(
        float(np.mean(signal.samples ** 2)),
        float(np.mean(segment ** 2)),
        snr_db,
    )
    return AudioClip(_peak_normalize(signal.samples + gain * segment), signal.sample_rate)


# ==================== JITTER ====================

def shift_clip(clip: AudioClip, shift_ms: float) -> AudioClip:
    """
    Translate content by ``shift_ms`` (positive = later), zero-filling the
    vacated region and keeping the length
    """
    n = len(clip)
    k = int(round(shift_ms * clip.sample_rate / 1000.0))
    out = np.zeros(n)
    if k >= 0:
        if k < n:
            out[k:] = clip.samples[:n - k]
    elif -k < n:
        out[:n + k] = clip.samples[-k:]
    return AudioClip(out, clip.sample_rate)


def random_jitter(clip: AudioClip, max_ms: float, rng: np.random.Generator) -> Tuple[AudioClip, float]:
    """
    Uniform random shift in [-max_ms, +max_ms]

    Returns:
        (shifted clip, applied shift in ms, quantized to whole samples)
    """
    if max_ms <= 0:
        return AudioClip(clip.samples.copy(), clip.sample_rate), 0.0

    drawn = float(rng.uniform(-max_ms, max_ms))
    samples = int(round(drawn * clip.sample_rate / 1000.0))
    applied = samples * 1000.0 / clip.sample_rate
    return shift_clip(clip, applied), applied


# ==================== FAR FIELD ====================

def apply_rir(clip: AudioClip, rir: ImpulseResponse) -> AudioClip:
    """
    Convolve with a room impulse response, truncated to the clip length

    Raises:
        ConfigError: Sample rate mismatch
    """
    if clip.sample_rate != rir.sample_rate:
        raise ConfigError(
            f"impulse response rate {rir.sample_rate} does not match clip rate {clip.sample_rate}"
        )

    method = "direct" if rir.samples.size <= DIRECT_CONVOLUTION_MAX_TAPS else "fft"
    wet = scipy.signal.convolve(clip.samples, rir.samples, mode="full", method=method)[:len(clip)]
    return AudioClip(_peak_normalize(wet), clip.sample_rate)


# ==================== PIPELINE ====================

def jittered_label(label: int, span_s: Optional[Tuple[float, float]], shift_ms: float, duration_s: float) -> int:
    """Positive only while the whole shifted span stays inside the window"""
    if label != 1 or span_s is None:
        return label
    shift_s = shift_ms / 1000.0
    begin, end = span_s[0] + shift_s, span_s[1] + shift_s
    return 1 if begin >= 0.0 and end <= duration_s + 1e-9 else 0


def make_training_example(
    clip: AudioClip,
    label: int,
    spec: AugmentSpec,
    noise_pool: Sequence[AudioClip],
    rng: np.random.Generator,
    feature_cfg: FeatureConfig,
    span_s: Optional[Tuple[float, float]] = None,
    rirs: Sequence[ImpulseResponse] = (),
    source: Optional[str] = None
) -> LabeledExample:
    """
    Augmented, featurized training window

    Pipeline: optional impulse response -> jitter -> noise at a uniformly
    drawn SNR -> featurize.

    Args:
        clip: Window-length positive clip or negative slice
        label: 1 = keyword, 0 = background
        spec: Augmentation settings
        noise_pool: Noise recordings (nonempty)
        rng: Per-example generator (see example_rng)
        feature_cfg: Frontend configuration
        span_s: Keyword span inside ``clip`` for the jitter labeling rule
        rirs: Impulse responses; empty disables the far-field stage
        source: Provenance string stored on the example

    Returns:
        LabeledExample with snr_db and shift_ms filled in; snr_db is None
        when the window or the noise slice is silent and the clean window
        was kept
    """
    if not noise_pool:
        raise ConfigError("noise pool is empty")

    if rirs:
        clip = apply_rir(clip, rirs[int(rng.integers(len(rirs)))])

    shifted, shift_ms = random_jitter(clip, spec.jitter_max_ms, rng)

    snr_db: Optional[float] = draw_snr_db(spec, rng)
    noise = noise_pool[int(rng.integers(len(noise_pool)))]
    try:
        mixed = mix_at_snr(shifted, noise, snr_db, rng)
    except (DegenerateSignalError, DegenerateNoiseError) as e:
        logger.warning(
            "Noise mixing skipped, keeping the clean window",
            extra={'source': source, 'reason': str(e)}
        )
        mixed, snr_db = shifted, None

    return LabeledExample(
        features=featurize(mixed, feature_cfg),
        label=jittered_label(label, span_s, shift_ms, clip.duration_s),
        source=source,
        snr_db=snr_db,
        shift_ms=shift_ms,
    )


def clean_example(clip: AudioClip, label: int, feature_cfg: FeatureConfig,
                  source: Optional[str] = None) -> LabeledExample:
    """Un-augmented example (dev sets, training without a noise pool)"""
    return LabeledExample(features=featurize(clip, feature_cfg), label=label, source=source)


# ==================== BATCHES ====================

def augment_windows(
    windows: Sequence[TrainingWindow],
    spec: AugmentSpec,
    noise_pool: Sequence[AudioClip],
    feature_cfg: FeatureConfig,
    epoch: int = 0,
    rirs: Sequence[ImpulseResponse] = (),
    workers: int = 1
) -> List[LabeledExample]:
    """
    One augmented example per window

    Example ``i`` draws from ``example_rng(spec.rng_seed, epoch, i)``, so the
    result does not depend on ``workers``. Without a noise pool the clean
    windows are featurized instead.
    """
    if not noise_pool:
        return ordered_map(
            lambda w: clean_example(w.clip, w.label, feature_cfg, w.source),
            windows,
            workers,
        )

    def build(item: Tuple[int, TrainingWindow]) -> LabeledExample:
        index, window = item
        return make_training_example(
            window.clip,
            window.label,
            spec,
            noise_pool,
            example_rng(spec.rng_seed, epoch, index),
            feature_cfg,
            span_s=window.span_s,
            rirs=rirs,
            source=window.source,
        )

    return ordered_map(build, list(enumerate(windows)), workers)


def build_feature_cache(
    path: str,
    windows: Sequence[TrainingWindow],
    spec: AugmentSpec,
    noise_pool: Sequence[AudioClip],
    feature_cfg: FeatureConfig,
    epoch: int = 0,
    rirs: Sequence[ImpulseResponse] = (),
    workers: int = 1
) -> List[LabeledExample]:
    """Augment every window and store the result as a msgpack feature cache"""
    examples = augment_windows(windows, spec, noise_pool, feature_cfg, epoch, rirs, workers)
    meta = {
        'epoch': epoch,
        'rng_seed': spec.rng_seed,
        'snr_db_range': list(spec.snr_db_range),
        'jitter_max_ms': spec.jitter_max_ms,
        'n_rirs': len(rirs),
        'n_noise': len(noise_pool),
        'feature': feature_cfg.to_dict(),
    }
    FeatureCacheRepository(path).save(examples, meta)
    return examples


def realized_snr_db(signal: np.ndarray, added_noise: np.ndarray) -> float:
    """10 log10 of signal over added-noise mean-square power"""
    return float(10.0 * np.log10(np.mean(signal ** 2) / np.mean(added_noise ** 2)))


__all__: List[str] = [
    'example_rng',
    'draw_snr_db',
    'snr_gain',
    'mix_at_snr',
    'shift_clip',
    'random_jitter',
    'apply_rir',
    'jittered_label',
    'make_training_example',
    'clean_example',
    'augment_windows',
    'build_feature_cache',
    'realized_snr_db',
]
