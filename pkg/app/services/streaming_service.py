"""
Streaming Service - sliding-window scoring, detections and DET evaluation
"""
import bisect
import csv
import logging
import math
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from sklearn.metrics import roc_curve
from tqdm import tqdm

from app.core.errors import ConfigError, DegenerateNoiseError, DegenerateSignalError, EmptyEvaluationError
from app.models.audio import AudioClip, FeatureConfig, FeatureMatrix
from app.models.augmentation import ImpulseResponse
from app.models.enums import Constants
from app.models.evaluation import (
    CLEAN,
    DetectionEvent,
    EvalCondition,
    EvalReport,
    GroundTruth,
    MatchResult,
    OperatingPoint,
    ScoreTrack,
    StreamConfig,
)
from app.models.training import ManifestRecord
from app.repositories.binary_format import write_bytes
from app.repositories.wav_repository import load_wav
from app.services.augment_service import apply_rir, mix_at_snr
from app.services.frontend_service import featurize
from app.utils.profiling import get_profiler
from app.utils.serialization import dumps_json
from app.utils.workers import ordered_map

logger = logging.getLogger(__name__)

# Window batches handed to the scorer at once
SCORE_CHUNK = 64

class WindowScorer(Protocol):
    feature_cfg: FeatureConfig

    def score_batch(self, windows: Sequence[FeatureMatrix]) -> np.ndarray:
        ...


# ==================== SCORING ====================

def window_starts(n_samples: int, window: int, hop: int) -> np.ndarray:
    """
    Sample offsets of every full window

    Examples:
        >>> len(window_starts(40000, 24000, 1600))
        11
        >>> len(window_starts(23999, 24000, 1600))
        0
    """
    if n_samples < window:
        return np.zeros(0, dtype=np.int64)
    return np.arange((n_samples - window) // hop + 1, dtype=np.int64) * hop


def stream_scores(clip: AudioClip, scorer: WindowScorer, cfg: StreamConfig = StreamConfig(),
                  source: Optional[str] = None) -> ScoreTrack:
    """
    Keyword score of every window of a recording

    Windows start at 0 and advance by ``cfg.hop_s``; each is featurized on
    its own and scored. Times are window end times.

    Args:
        clip: Recording at the scorer's feature sample rate
        scorer: Object with ``feature_cfg`` and ``score_batch``
        cfg: Window geometry
        source: Label stored on the track

    Returns:
        ScoreTrack, empty (with a warning) when the clip is shorter than a window
    """
    feature_cfg = getattr(scorer, 'feature_cfg', None) or FeatureConfig()
    sr = clip.sample_rate
    window, hop = cfg.window_samples(sr), cfg.hop_samples(sr)
    starts = window_starts(len(clip), window, hop)

    if starts.size == 0:
        logger.warning(
            "Clip shorter than one window; no scores",
            extra={'source': source, 'duration_s': round(clip.duration_s, 3), 'window_s': cfg.window_s}
        )
        return ScoreTrack(np.zeros(0), np.zeros(0), source)

    profiler = get_profiler()
    scores = np.empty(starts.size)
    for lo in range(0, starts.size, SCORE_CHUNK):
        chunk = starts[lo:lo + SCORE_CHUNK]
        began = time.perf_counter()
        features = [featurize(AudioClip(clip.samples[s:s + window], sr), feature_cfg) for s in chunk]
        scores[lo:lo + chunk.size] = scorer.score_batch(features)
        profiler.record('stream_window', (time.perf_counter() - began) / chunk.size)

    times = (starts + window) / sr
    return ScoreTrack(times, scores, source)


# ==================== DECISIONS ====================

TrackLike = Union[ScoreTrack, Sequence[Tuple[float, float]]]


def _as_track(scores: TrackLike) -> ScoreTrack:
    if isinstance(scores, ScoreTrack):
        return scores
    pairs = list(scores)
    if not pairs:
        return ScoreTrack(np.zeros(0), np.zeros(0))
    times, values = zip(*pairs)
    return ScoreTrack(np.array(times), np.array(values))


def detect(scores: TrackLike, threshold: float, refractory_s: float) -> List[DetectionEvent]:
    """
    Threshold a time-ordered score sequence

    An event is emitted for each score >= ``threshold`` lying more than
    ``refractory_s`` after the previous emitted event.

    Examples:
        >>> detect([(1.5, 0.1), (1.6, 0.95), (1.7, 0.9), (1.8, 0.2)], 0.8, 1.0)
        [DetectionEvent(time_s=1.6, score=0.95)]
    """
    track = _as_track(scores)
    events: List[DetectionEvent] = []
    last = -math.inf
    for i in np.flatnonzero(track.scores >= threshold):
        t = float(track.times_s[i])
        if t - last > refractory_s + 1e-9:
            events.append(DetectionEvent(time_s=t, score=float(track.scores[i])))
            last = t
    return events


def negative_audio_s(duration_s: float, spans: Iterable[Tuple[float, float]]) -> float:
    """Keyword-free duration of a file"""
    return max(duration_s - sum(end - begin for begin, end in spans), 0.0)


def match_detections(events: Sequence[DetectionEvent], truth: GroundTruth,
                     tol_s: float = Constants.MATCH_TOLERANCE_S) -> MatchResult:
    """
    Score detections against keyword spans

    Events are visited in time order; each takes the earliest-ending
    unmatched keyword whose end lies within ``tol_s``. Unmatched events
    that still fall inside a keyword region [begin - tol, end + tol] are
    ignored; the rest are false alarms on negative audio.

    Raises:
        EmptyEvaluationError: No keywords and no negative audio
    """
    if truth.n_keywords == 0 and truth.total_negative_audio_s <= 0:
        raise EmptyEvaluationError("nothing to evaluate: no keywords and no negative audio")

    ends = [end for _, end in truth.spans]
    matched = [False] * len(ends)
    hits = false_alarms = 0

    for event in sorted(events, key=lambda e: e.time_s):
        t = event.time_s
        target = None
        for k in sorted(range(len(ends)), key=lambda k: ends[k]):
            if not matched[k] and ends[k] - tol_s <= t <= ends[k] + tol_s:
                target = k
                break
        if target is not None:
            matched[target] = True
            hits += 1
        elif not any(begin - tol_s <= t <= end + tol_s for begin, end in truth.spans):
            false_alarms += 1

    return MatchResult(
        hits=hits,
        misses=len(ends) - hits,
        false_alarms=false_alarms,
        negative_audio_s=truth.total_negative_audio_s,
    )


# ==================== DET CURVE ====================

def det_thresholds(scores: np.ndarray) -> np.ndarray:
    """Every unique score plus 1.0, descending"""
    return np.unique(np.append(np.asarray(scores, dtype=np.float64), 1.0))[::-1]


def refractory_successors(times: np.ndarray, refractory_s: float) -> np.ndarray:
    """
    Index of the first window allowed to fire after each window

    Uses the same ``t - last > refractory_s + 1e-9`` test as detect so the
    two agree on boundary windows.
    """
    limit = refractory_s + 1e-9
    nxt = np.searchsorted(times, times + limit, side='right')
    for i in range(times.size):
        k = int(nxt[i])
        while k > i + 1 and times[k - 1] - times[i] > limit:
            k -= 1
        while k < times.size and not times[k] - times[i] > limit:
            k += 1
        nxt[i] = k
    return nxt


class _MatchCluster:
    """Keywords whose match windows overlap; hits depend only on events inside them"""

    def __init__(self, ends: List[float], lo: int, hi: int):
        self.ends = ends
        self.lo = lo
        self.hi = hi
        self.hits = 0

    def recount(self, event_times: Iterable[float], tol_s: float) -> int:
        matched = [False] * len(self.ends)
        hits = 0
        for t in event_times:
            for k, end in enumerate(self.ends):
                if not matched[k] and end - tol_s <= t <= end + tol_s:
                    matched[k] = True
                    hits += 1
                    break
        delta = hits - self.hits
        self.hits = hits
        return delta


class _FileSweep:
    """
    detect + match_detections of one file, kept current as the threshold falls

    Windows are added in order of decreasing score. An added window only
    changes the greedy refractory chain from its own position up to the
    first old event the new chain lands on again, so each addition replays
    that stretch instead of the whole file.
    """

    def __init__(self, track: ScoreTrack, truth: GroundTruth, cfg: StreamConfig):
        times = track.times_s
        tol = cfg.tolerance_s
        self.times = times
        self.tol_s = tol
        self.successor = refractory_successors(times, cfg.refractory_s)

        self.in_region = np.zeros(times.size, dtype=bool)
        for begin, end in truth.spans:
            self.in_region |= (begin - tol <= times) & (times <= end + tol)

        groups: List[List[float]] = []
        for end in sorted(end for _, end in truth.spans):
            if groups and end - tol <= groups[-1][-1] + tol:
                groups[-1].append(end)
            else:
                groups.append([end])

        self.cluster_of = np.full(times.size, -1, dtype=np.int64)
        self.clusters: List[_MatchCluster] = []
        for ends in groups:
            mask = np.zeros(times.size, dtype=bool)
            for end in ends:
                mask |= (end - tol <= times) & (times <= end + tol)
            inside = np.flatnonzero(mask)
            if inside.size:
                self.cluster_of[inside] = len(self.clusters)
                self.clusters.append(_MatchCluster(ends, int(inside[0]), int(inside[-1]) + 1))

        self.n_keywords = truth.n_keywords
        self.negative_audio_s = truth.total_negative_audio_s
        self.candidates: List[int] = []
        self.chain: List[int] = []
        self.hits = 0
        self.false_alarms = 0

    def _add_event(self, index: int, pos: int, touched: set):
        self.chain.insert(pos, index)
        if not self.in_region[index]:
            self.false_alarms += 1
        if self.cluster_of[index] >= 0:
            touched.add(int(self.cluster_of[index]))

    def _remove_event(self, pos: int, touched: set):
        index = self.chain.pop(pos)
        if not self.in_region[index]:
            self.false_alarms -= 1
        if self.cluster_of[index] >= 0:
            touched.add(int(self.cluster_of[index]))

    def add(self, index: int):
        bisect.insort(self.candidates, index)
        pos = bisect.bisect_left(self.chain, index)
        if pos > 0 and index < self.successor[self.chain[pos - 1]]:
            return

        touched: set = set()
        self._add_event(index, pos, touched)
        pos += 1
        current = index
        while True:
            q = bisect.bisect_left(self.candidates, int(self.successor[current]))
            following = self.candidates[q] if q < len(self.candidates) else None
            while pos < len(self.chain) and (following is None or self.chain[pos] < following):
                self._remove_event(pos, touched)
            if following is None or (pos < len(self.chain) and self.chain[pos] == following):
                break
            self._add_event(following, pos, touched)
            pos += 1
            current = following

        for c in touched:
            cluster = self.clusters[c]
            lo = bisect.bisect_left(self.chain, cluster.lo)
            hi = bisect.bisect_left(self.chain, cluster.hi)
            self.hits += cluster.recount((self.times[i] for i in self.chain[lo:hi]), self.tol_s)

    def result(self) -> MatchResult:
        return MatchResult(
            hits=self.hits,
            misses=self.n_keywords - self.hits,
            false_alarms=self.false_alarms,
            negative_audio_s=self.negative_audio_s,
        )


def det_curve(files: Sequence[Tuple[ScoreTrack, GroundTruth]], cfg: StreamConfig = StreamConfig()) -> EvalReport:
    """
    DET operating points over a set of scored files

    Thresholds are every unique window score plus 1.0, in descending
    order. Each point holds the counts detect and match_detections give
    at that threshold, summed over files. The refractory rule can make
    those raw counts non-monotone, so the reported FA/hour at a threshold
    is the largest raw value at any higher-or-equal threshold and the FRR
    the largest at any lower-or-equal one; the raw values are kept on the
    point.

    Raises:
        EmptyEvaluationError: No files, or no keywords and no negative audio
    """
    files = [(track, truth) for track, truth in files
             if truth.n_keywords or truth.total_negative_audio_s > 0]
    if not files:
        raise EmptyEvaluationError("evaluation set has no keywords and no negative audio")

    sweeps = [_FileSweep(track, truth, cfg) for track, truth in files]
    all_scores = np.concatenate([track.scores for track, _ in files])
    owner = np.concatenate([np.full(len(track), f, dtype=np.int64) for f, (track, _) in enumerate(files)])
    local = np.concatenate([np.arange(len(track), dtype=np.int64) for track, _ in files])
    order = np.argsort(-all_scores, kind='stable')

    thresholds = det_thresholds(all_scores)
    fa = np.empty(thresholds.size)
    frr = np.empty(thresholds.size)
    cursor = 0
    for i, threshold in enumerate(thresholds):
        while cursor < order.size and all_scores[order[cursor]] >= threshold:
            j = order[cursor]
            sweeps[owner[j]].add(int(local[j]))
            cursor += 1
        total = MatchResult()
        for sweep in sweeps:
            total = total + sweep.result()
        fa[i], frr[i] = total.fa_per_hour, total.frr_percent

    points = [
        OperatingPoint(float(t), float(a), float(r), float(raw_a), float(raw_r))
        for t, a, r, raw_a, raw_r in zip(
            thresholds, np.maximum.accumulate(fa), np.maximum.accumulate(frr[::-1])[::-1], fa, frr
        )
    ]
    return EvalReport(points=points)


def frr_at_target_fa(report: EvalReport, target: float) -> float:
    """
    Lowest FRR% among points with FA/hour <= ``target``

    Returns:
        FRR percent, or ``math.inf`` when no point qualifies
    """
    eligible = [p.frr_percent for p in report.points if p.fa_per_hour <= target]
    return min(eligible) if eligible else math.inf


def window_level_eer(positive: Sequence[float], negative: Sequence[float]) -> Optional[float]:
    """Equal error rate of windows as a binary classification, None without both classes"""
    positive = np.asarray(positive, dtype=np.float64)
    negative = np.asarray(negative, dtype=np.float64)
    if positive.size == 0 or negative.size == 0:
        return None

    y_true = np.concatenate([np.ones(positive.size), np.zeros(negative.size)])
    fpr, tpr, _ = roc_curve(y_true, np.concatenate([positive, negative]))
    fnr = 1.0 - tpr
    i = int(np.argmin(np.abs(fnr - fpr)))
    return float((fpr[i] + fnr[i]) / 2.0)


# ==================== TEST CONDITIONS ====================

def condition_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for the degradation of file ``index``, independent of scheduling order"""
    return np.random.default_rng([seed, index])


def degrade_clip(
    clip: AudioClip,
    condition: EvalCondition,
    noise_pool: Sequence[AudioClip] = (),
    rirs: Sequence[ImpulseResponse] = (),
    rng: Optional[np.random.Generator] = None,
    source: Optional[str] = None
) -> AudioClip:
    """
    Apply an evaluation condition to one recording

    The impulse response (if any) is applied before the noise. A silent
    recording or noise slice keeps the recording as it was, with a warning.

    Raises:
        ConfigError: The condition needs a pool that is empty
    """
    if condition.is_clean:
        return clip
    rng = rng if rng is not None else np.random.default_rng(0)

    if condition.rir:
        if not rirs:
            raise ConfigError(f"condition {condition.name!r} needs impulse responses")
        clip = apply_rir(clip, rirs[int(rng.integers(len(rirs)))])

    if condition.snr_db is not None:
        if not noise_pool:
            raise ConfigError(f"condition {condition.name!r} needs a noise pool")
        noise = noise_pool[int(rng.integers(len(noise_pool)))]
        try:
            clip = mix_at_snr(clip, noise, condition.snr_db, rng)
        except (DegenerateSignalError, DegenerateNoiseError) as e:
            logger.warning(
                "Noise mixing skipped for evaluation file",
                extra={'source': source, 'condition': condition.name, 'reason': str(e)}
            )
    return clip


# ==================== EVALUATION ====================

@dataclass
class ScoredFile:
    track: ScoreTrack
    truth: GroundTruth


def window_classes(track: ScoreTrack, spans: Sequence[Tuple[float, float]],
                   window_s: float) -> Tuple[np.ndarray, np.ndarray]:
    """(positive, negative) window scores; windows partly overlapping a keyword are left out"""
    positive, negative = [], []
    for end_t, score in zip(track.times_s, track.scores):
        begin_t = end_t - window_s
        if any(begin_t <= b and e <= end_t for b, e in spans):
            positive.append(score)
        elif not any(b < end_t and begin_t < e for b, e in spans):
            negative.append(score)
    return np.array(positive), np.array(negative)


def score_file(
    record: ManifestRecord,
    scorer: WindowScorer,
    cfg: StreamConfig,
    condition: EvalCondition = CLEAN,
    noise_pool: Sequence[AudioClip] = (),
    rirs: Sequence[ImpulseResponse] = (),
    rng: Optional[np.random.Generator] = None
) -> ScoredFile:
    clip = load_wav(record.path)
    spans = record.keyword_spans
    truth = GroundTruth(spans=spans, total_negative_audio_s=negative_audio_s(clip.duration_s, spans))
    clip = degrade_clip(clip, condition, noise_pool, rirs, rng, source=record.path)
    return ScoredFile(track=stream_scores(clip, scorer, cfg, source=record.path), truth=truth)


def evaluate(
    records: Sequence[ManifestRecord],
    scorer: WindowScorer,
    cfg: StreamConfig = StreamConfig(),
    targets: Sequence[float] = Constants.REPORT_TARGETS_FA,
    workers: int = 1,
    show_progress: bool = False,
    condition: EvalCondition = CLEAN,
    noise_pool: Sequence[AudioClip] = (),
    rirs: Sequence[ImpulseResponse] = (),
    seed: int = 0
) -> Tuple[EvalReport, List[ScoredFile]]:
    """
    Stream-score every file of an evaluation manifest and build the report

    Files are scored by ``workers`` threads and reduced in manifest order.
    Under a noisy or far-field ``condition`` file ``i`` draws its noise
    slice and impulse response from ``condition_rng(seed, i)``, so the
    report does not depend on ``workers``.

    Returns:
        (report with FRR at each target FA/hour and the window EER, per-file results)
    """
    if not records:
        raise EmptyEvaluationError("evaluation manifest has no records")

    with tqdm(total=len(records), desc=f"eval {condition.name}", unit="file", disable=not show_progress) as bar:
        def work(item: Tuple[int, ManifestRecord]) -> ScoredFile:
            index, record = item
            result = score_file(record, scorer, cfg, condition, noise_pool, rirs, condition_rng(seed, index))
            bar.update(1)
            return result

        scored = ordered_map(work, list(enumerate(records)), workers)

    report = det_curve([(f.track, f.truth) for f in scored], cfg)
    report.condition = condition.name
    report.frr_at_targets = {float(t): frr_at_target_fa(report, t) for t in targets}

    classes = [window_classes(f.track, f.truth.spans, cfg.window_s) for f in scored]
    report.window_eer = window_level_eer(
        np.concatenate([p for p, _ in classes]),
        np.concatenate([n for _, n in classes]),
    )

    logger.info("Evaluation complete", extra={
        'condition': condition.name,
        'files': len(scored),
        'keywords': sum(f.truth.n_keywords for f in scored),
        'negative_hours': round(sum(f.truth.total_negative_audio_s for f in scored) / 3600.0, 4),
        'points': len(report.points),
    })
    return report, scored


# ==================== REPORTS ====================

REPORT_HEADER = ['threshold', 'fa_per_hour', 'frr_percent', 'raw_fa_per_hour', 'raw_frr_percent']


def write_report_csv(path: str, report: EvalReport):
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_HEADER)
        for point in report.points:
            writer.writerow(point.to_row())


def write_summary(path: str, report: EvalReport):
    write_bytes(path, dumps_json(report.summary(), indent=True))


__all__ = [
    'window_starts',
    'stream_scores',
    'detect',
    'negative_audio_s',
    'match_detections',
    'det_thresholds',
    'det_curve',
    'frr_at_target_fa',
    'window_level_eer',
    'condition_rng',
    'degrade_clip',
    'ScoredFile',
    'window_classes',
    'score_file',
    'evaluate',
    'write_report_csv',
    'write_summary',
]
