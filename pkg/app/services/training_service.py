"""
Training Service - cross-entropy loss, gradients, Adam and the training loop
"""
import csv
import logging
import math
import os
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp
from tqdm import tqdm

from app.core.errors import ConfigError, NumericError
from app.models.audio import AudioClip, FeatureConfig
from app.models.augmentation import AugmentSpec, ImpulseResponse
from app.models.enums import Constants
from app.models.network import Checkpoint, ModelConfig, Weights
from app.models.training import (
    AdamState,
    EpochMetrics,
    LabeledExample,
    ManifestRecord,
    TrainConfig,
    TrainingWindow,
)
from app.repositories.wav_repository import load_wav
from app.services.augment_service import augment_windows, clean_example, jittered_label
from app.services.network_service import (
    _as_batch,
    backward_from_cache,
    forward_batch,
    init_weights,
    relu_pattern,
)

logger = logging.getLogger(__name__)

METRICS_HEADER = ['epoch', 'step', 'train_loss', 'dev_loss', 'lr']

EpochSource = Callable[[int], List[LabeledExample]]


# ==================== LOSS ====================

def ce_losses(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Elementwise binary cross-entropy with p clamped away from 0 and 1"""
    p = np.clip(np.asarray(p, dtype=np.float64), Constants.PROB_CLAMP, 1.0 - Constants.PROB_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def ce_loss(p: float, y: int) -> float:
    """
    Cross-entropy of one keyword posterior

    Examples:
        >>> round(ce_loss(0.5, 1), 4)
        0.6931
        >>> round(ce_loss(0.9, 0), 4)
        2.3026
    """
    return float(ce_losses(np.array([p]), np.array([y]))[0])


def stack_examples(batch: Sequence[LabeledExample], cfg: ModelConfig) -> Tuple[np.ndarray, np.ndarray]:
    """(B, mels, frames) float64 features and (B,) integer labels"""
    x = _as_batch([ex.features for ex in batch], cfg)
    y = np.array([ex.label for ex in batch], dtype=np.int64)
    return x, y


# ==================== GRADIENTS ====================

def loss_and_grads(weights: Weights, cfg: ModelConfig, x: np.ndarray,
                   y: np.ndarray) -> Tuple[float, Weights]:
    """Mean clamped CE of a stacked batch and its exact gradient"""
    probs, cache = forward_batch(x, cfg, weights, keep=True)
    losses = ce_losses(probs[:, 1], y)
    bad = np.flatnonzero(~np.isfinite(losses))
    if bad.size:
        raise NumericError("non-finite loss", index=int(bad[0]))

    grads = backward_from_cache(cache, y, cfg, weights)
    if not grads.is_finite():
        raise NumericError("non-finite gradient")
    return float(losses.mean()), grads


def backward(ckpt: Checkpoint, batch: Sequence[LabeledExample]) -> Tuple[float, Weights]:
    """
    Mean loss and gradient over a batch

    Args:
        ckpt: Model whose weights are differentiated
        batch: Nonempty list of labeled windows

    Returns:
        (mean CE loss, float64 gradients shaped like the weights)

    Raises:
        EmptyInputError: Empty batch
        NumericError: Non-finite loss (payload carries the example index)
    """
    x, y = stack_examples(batch, ckpt.config)
    return loss_and_grads(ckpt.weights, ckpt.config, x, y)


def mean_loss(weights: Weights, cfg: ModelConfig, x: np.ndarray, y: np.ndarray,
              chunk: int = 256) -> float:
    if x.shape[0] == 0:
        return math.nan
    total = 0.0
    for start in range(0, x.shape[0], chunk):
        probs, _ = forward_batch(x[start:start + chunk], cfg, weights)
        total += float(ce_losses(probs[:, 1], y[start:start + chunk]).sum())
    return total / x.shape[0]


@dataclass
class GradientCheckResult:
    max_rel_error: float
    checked: int
    skipped_kinks: int
    worst: Optional[str] = None


def _exact_loss(weights: Weights, cfg: ModelConfig, x: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """Unclamped mean CE from logits, plus the ReLU pattern of the pass"""
    _, cache = forward_batch(x, cfg, weights, keep=True)
    logits = cache.logits
    loss = np.mean(logsumexp(logits, axis=1) - logits[np.arange(len(y)), y])
    return float(loss), relu_pattern(cache, cfg)


def gradient_check(
    weights: Weights,
    cfg: ModelConfig,
    x: np.ndarray,
    y: np.ndarray,
    max_per_tensor: Optional[int] = None,
    rng: Optional[np.random.Generator] = None
) -> GradientCheckResult:
    """
    Compare analytic gradients with central differences

    Each coordinate is perturbed by h = 1e-4 (1 + |theta|) and h/2; the two
    central differences are combined by Richardson extrapolation. A
    coordinate whose perturbations change any ReLU on/off state sits on a
    kink and is skipped.

    Args:
        weights: Weights to check (copied and upcast to float64)
        cfg: Model configuration
        x: (B, mels, frames) inputs
        y: (B,) labels
        max_per_tensor: Sample at most this many coordinates per tensor
        rng: Generator for the coordinate sample

    Returns:
        GradientCheckResult with the largest relative error
        |a - n| / max(|a|, |n|, 1e-6)
    """
    theta = weights.astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)

    _, cache = forward_batch(x, cfg, theta, keep=True)
    analytic = backward_from_cache(cache, y, cfg, theta)
    base_pattern = relu_pattern(cache, cfg)
    rng = rng or np.random.default_rng(0)

    worst, worst_name, checked, skipped = 0.0, None, 0, 0
    for name, tensor in theta.items():
        flat = tensor.reshape(-1)
        coords = np.arange(flat.size)
        if max_per_tensor is not None and flat.size > max_per_tensor:
            coords = np.sort(rng.choice(flat.size, size=max_per_tensor, replace=False))

        for i in coords:
            original = flat[i]
            h = 1e-4 * (1.0 + abs(original))
            values, kink = {}, False
            for step in (h, -h, h / 2, -h / 2):
                flat[i] = original + step
                values[step], pattern = _exact_loss(theta, cfg, x, y)
                kink = kink or not np.array_equal(pattern, base_pattern)
            flat[i] = original

            if kink:
                skipped += 1
                continue

            d_full = (values[h] - values[-h]) / (2 * h)
            d_half = (values[h / 2] - values[-h / 2]) / h
            numeric = (4.0 * d_half - d_full) / 3.0
            a = float(analytic[name].reshape(-1)[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            checked += 1
            if rel > worst:
                worst, worst_name = rel, f"{name}[{i}]"

    return GradientCheckResult(max_rel_error=worst, checked=checked, skipped_kinks=skipped, worst=worst_name)


# ==================== OPTIMIZER ====================

def adam_step(weights: Weights, grads: Weights, state: AdamState, lr: float,
              cfg: TrainConfig = TrainConfig()) -> Tuple[Weights, AdamState]:
    """
    One bias-corrected Adam update

    Returns new float64 weights; ``state`` is advanced in place and returned.
    On the first step every coordinate moves by about -lr * sign(g).
    """
    beta1, beta2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t

    updated = weights.astype(np.float64)
    for name, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = updated[name] - lr * m_hat / (np.sqrt(v_hat) + eps)
    return updated, state


class LearningRateSchedule:
    """
    Single plateau drop from lr_initial to lr_final

    The drop fires once the dev loss has not improved for
    ``lr_drop_patience`` consecutive epochs.
    """

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.lr = cfg.lr_initial
        self.best = math.inf
        self.stale_epochs = 0
        self.dropped = False

    def observe(self, epoch: int, dev_loss: float) -> bool:
        """Record an epoch's dev loss; True when it improved on the best so far"""
        if dev_loss < self.best:
            self.best = dev_loss
            self.stale_epochs = 0
            return True

        self.stale_epochs += 1
        if not self.dropped and self.stale_epochs >= self.cfg.lr_drop_patience:
            self.dropped = True
            self.lr = self.cfg.lr_final
            logger.info(
                "Dropping learning rate",
                extra={'epoch': epoch, 'lr': self.lr, 'stale_epochs': self.stale_epochs}
            )
        return False


# ==================== WINDOWS ====================

def _padded_slice(samples: np.ndarray, start: int, length: int) -> np.ndarray:
    out = np.zeros(length)
    lo, hi = max(start, 0), min(start + length, len(samples))
    if hi > lo:
        out[lo - start:hi - start] = samples[lo:hi]
    return out


def prepare_window(clip: AudioClip, record: ManifestRecord,
                   window_s: float = Constants.WINDOW_S) -> TrainingWindow:
    """
    Cut one model window out of a manifest example

    Positives are centered on their keyword span (the whole clip when no
    span is given) and kept inside the file when it is long enough.
    Negatives start at ``offset_s`` (0 when absent). Short audio is zero
    padded.
    """
    sr = clip.sample_rate
    length = int(round(window_s * sr))
    duration = clip.duration_s

    if record.target == 1:
        begin, end = record.span_s if record.span_s is not None else (0.0, duration)
        if duration >= window_s:
            start_s = min(max((begin + end) / 2.0 - window_s / 2.0, 0.0), duration - window_s)
        else:
            start_s = (duration - window_s) / 2.0
        start = int(round(start_s * sr))
        start_s = start / sr
        span = (begin - start_s, end - start_s)
        label = jittered_label(1, span, 0.0, window_s)
        if label == 0:
            logger.warning(
                "Keyword span does not fit in one window; using it as a negative",
                extra={'path': record.path, 'span_s': [begin, end]}
            )
            span = None
    else:
        start = int(round((record.offset_s or 0.0) * sr))
        span, label = None, 0

    return TrainingWindow(
        clip=AudioClip(_padded_slice(clip.samples, start, length), sr),
        label=label,
        span_s=span,
        source=record.path,
    )


def load_windows(records: Sequence[ManifestRecord], feature_cfg: FeatureConfig,
                 window_s: float = Constants.WINDOW_S) -> List[TrainingWindow]:
    """Read every example's audio and cut its window (files read once)"""
    audio: Dict[str, AudioClip] = {}
    windows = []
    for record in records:
        if record.path not in audio:
            audio[record.path] = load_wav(record.path)
        clip = audio[record.path]
        if clip.sample_rate != feature_cfg.sample_rate:
            raise ConfigError(
                f"{record.path}: sample rate {clip.sample_rate} does not match {feature_cfg.sample_rate}"
            )
        windows.append(prepare_window(clip, record, window_s))
    return windows


def load_audio_pool(records: Sequence[ManifestRecord]) -> List[AudioClip]:
    return [load_wav(r.path) for r in records]


def load_impulse_responses(records: Sequence[ManifestRecord]) -> List[ImpulseResponse]:
    rirs = []
    for record in records:
        clip = load_wav(record.path)
        rirs.append(ImpulseResponse(clip.samples, clip.sample_rate, label=record.extra.get('descriptor')))
    return rirs


# ==================== TRAINING LOOP ====================

def evaluate_accuracy(ckpt: Checkpoint, examples: Sequence[LabeledExample], threshold: float = 0.5) -> float:
    """Percentage of examples whose posterior falls on the labeled side of ``threshold``"""
    x, y = stack_examples(examples, ckpt.config)
    weights = ckpt.weights.astype(np.float64)
    correct = 0
    for start in range(0, x.shape[0], 256):
        probs, _ = forward_batch(x[start:start + 256], ckpt.config, weights)
        correct += int(np.sum((probs[:, 1] >= threshold).astype(np.int64) == y[start:start + 256]))
    return 100.0 * correct / x.shape[0]


def append_metrics(path: str, row: EpochMetrics):
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'a', newline='') as handle:
        writer = csv.writer(handle)
        if new_file:
            writer.writerow(METRICS_HEADER)
        writer.writerow(row.to_row())


def fit(
    epoch_source: EpochSource,
    dev_examples: Sequence[LabeledExample],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    feature_cfg: FeatureConfig = FeatureConfig(),
    init: Optional[Weights] = None,
    metrics_path: Optional[str] = None,
    show_progress: bool = False
) -> Tuple[Checkpoint, List[EpochMetrics]]:
    """
    Minibatch Adam over the examples produced for each epoch

    Args:
        epoch_source: Returns the (augmented) examples of a 1-based epoch
        dev_examples: Fixed held-out examples for the plateau rule
        model_cfg: Architecture
        train_cfg: Optimizer, schedule and seed
        feature_cfg: Stored in the checkpoint
        init: Starting weights (fresh initialization when None)
        metrics_path: CSV file the per-epoch metrics are appended to
        show_progress: Draw a tqdm bar over epochs

    Returns:
        (best-dev-loss checkpoint, metrics rows)
    """
    rng = np.random.default_rng(train_cfg.seed)
    if init is None:
        weights = init_weights(model_cfg, rng, dtype=np.float64)
    else:
        init.check_shapes(model_cfg)
        weights = init.astype(np.float64)

    dev_x, dev_y = stack_examples(dev_examples, model_cfg)
    state = AdamState.for_weights(weights)
    schedule = LearningRateSchedule(train_cfg)
    best_weights, best_epoch = weights.copy(), 0
    metrics: List[EpochMetrics] = []
    step = 0

    epochs = tqdm(range(1, train_cfg.max_epochs + 1), desc="train", unit="epoch", disable=not show_progress)
    for epoch in epochs:
        examples = epoch_source(epoch)
        if not examples:
            raise ConfigError("no training examples")
        x, y = stack_examples(examples, model_cfg)
        order = rng.permutation(x.shape[0])
        lr = schedule.lr

        loss_sum, seen = 0.0, 0
        for start in range(0, len(order), train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            try:
                loss, grads = loss_and_grads(weights, model_cfg, x[idx], y[idx])
            except NumericError as e:
                if e.index is not None:
                    e.payload['source'] = examples[int(idx[e.index])].source
                raise
            weights, state = adam_step(weights, grads, state, lr, train_cfg)
            loss_sum += loss * len(idx)
            seen += len(idx)
            step += 1
            if train_cfg.max_steps is not None and step >= train_cfg.max_steps:
                break

        row = EpochMetrics(
            epoch=epoch,
            step=step,
            train_loss=loss_sum / seen,
            dev_loss=mean_loss(weights, model_cfg, dev_x, dev_y),
            lr=lr,
        )
        metrics.append(row)
        if metrics_path:
            append_metrics(metrics_path, row)
        logger.info("Epoch complete", extra={
            'epoch': epoch, 'step': step, 'train_loss': round(row.train_loss, 6),
            'dev_loss': round(row.dev_loss, 6), 'lr': lr,
        })
        epochs.set_postfix(train=f"{row.train_loss:.4f}", dev=f"{row.dev_loss:.4f}")

        if schedule.observe(epoch, row.dev_loss):
            best_weights, best_epoch = weights.copy(), epoch

        if train_cfg.max_steps is not None and step >= train_cfg.max_steps:
            break

    ckpt = Checkpoint(
        config=model_cfg,
        weights=best_weights.astype(np.float32),
        feature_cfg=feature_cfg,
        metadata={
            'seed': train_cfg.seed,
            'steps': step,
            'best_epoch': best_epoch,
            'best_dev_loss': f"{schedule.best:.8f}",
        },
    )
    return ckpt, metrics


def split_records(records: Sequence[ManifestRecord]) -> Tuple[List[ManifestRecord], List[ManifestRecord]]:
    """(train, dev) example records; test records are ignored"""
    train = [r for r in records if r.split == "train"]
    dev = [r for r in records if r.split == "dev"]
    return train, dev


def subsample_records(records: Sequence[ManifestRecord], fraction: float, seed: int = 0) -> List[ManifestRecord]:
    """
    Seeded per-class subset of training records, in manifest order

    Each label keeps round(fraction * n) of its n records (at least one).
    Smaller fractions of the same seed are subsets of larger ones, so a
    data-amount sweep trains on nested sets.

    Examples:
        >>> recs = [ManifestRecord(path=f"{i}.wav", label="negative") for i in range(10)]
        >>> len(subsample_records(recs, 0.3))
        3
    """
    if fraction >= 1.0:
        return list(records)

    by_label: Dict[Optional[str], List[int]] = {}
    for i, record in enumerate(records):
        by_label.setdefault(record.label, []).append(i)

    keep = []
    rng = np.random.default_rng([seed, 0x5EED])
    for label in sorted(by_label, key=str):
        indices = by_label[label]
        n_keep = max(1, int(round(fraction * len(indices))))
        keep.extend(np.asarray(indices)[rng.permutation(len(indices))[:n_keep]].tolist())
    return [records[i] for i in sorted(keep)]


def train(
    records: Sequence[ManifestRecord],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    feature_cfg: FeatureConfig = FeatureConfig(),
    augment_spec: AugmentSpec = AugmentSpec(),
    noise_pool: Sequence[AudioClip] = (),
    rirs: Sequence[ImpulseResponse] = (),
    metrics_path: Optional[str] = None,
    init: Optional[Weights] = None,
    window_s: float = Constants.WINDOW_S,
    workers: int = 1,
    show_progress: bool = False
) -> Tuple[Checkpoint, List[EpochMetrics]]:
    """
    Train a checkpoint from manifest example records

    ``train_cfg.data_fraction`` below 1 trains on a seeded per-class subset
    of the train records (see subsample_records).
    Every epoch re-augments the training windows with seeds derived from
    (augment seed, epoch, example index). Dev windows are never augmented;
    without dev records the clean training windows serve as the dev set.

    Raises:
        ConfigError: No train records, or only one class present
    """
    train_records, dev_records = split_records(records)
    if not train_records:
        raise ConfigError("manifest has no training examples")
    if train_cfg.data_fraction < 1.0:
        kept = subsample_records(train_records, train_cfg.data_fraction, train_cfg.seed)
        logger.info("Training on a subset of the records", extra={
            'fraction': train_cfg.data_fraction, 'kept': len(kept), 'available': len(train_records),
        })
        train_records = kept

    train_windows = load_windows(train_records, feature_cfg, window_s)
    labels = {w.label for w in train_windows}
    if labels != {0, 1}:
        raise ConfigError(
            "training needs at least one positive and one negative window",
            payload={'labels': sorted(labels)}
        )

    if not noise_pool:
        logger.warning("No noise pool in manifest; training on clean windows")

    dev_windows = load_windows(dev_records, feature_cfg, window_s) if dev_records else train_windows
    dev_examples = [clean_example(w.clip, w.label, feature_cfg, w.source) for w in dev_windows]

    logger.info("Starting training", extra={
        'train_windows': len(train_windows),
        'dev_windows': len(dev_examples),
        'positives': sum(w.label for w in train_windows),
        'noise_files': len(noise_pool),
        'rirs': len(rirs),
    })

    def epoch_source(epoch: int) -> List[LabeledExample]:
        return augment_windows(train_windows, augment_spec, noise_pool, feature_cfg, epoch, rirs, workers)

    return fit(epoch_source, dev_examples, model_cfg, train_cfg, feature_cfg, init, metrics_path, show_progress)


__all__ = [
    'subsample_records',
    'ce_loss',
    'ce_losses',
    'stack_examples',
    'loss_and_grads',
    'backward',
    'mean_loss',
    'GradientCheckResult',
    'gradient_check',
    'adam_step',
    'LearningRateSchedule',
    'prepare_window',
    'load_windows',
    'load_audio_pool',
    'load_impulse_responses',
    'evaluate_accuracy',
    'fit',
    'split_records',
    'train',
]
