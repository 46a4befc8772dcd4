"""
Mining Service - hard negative windows from keyword-free recordings
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import DataError
from app.models.evaluation import StreamConfig
from app.models.training import ManifestRecord
from app.repositories.wav_repository import load_wav
from app.services.streaming_service import WindowScorer, stream_scores
from app.utils.workers import ordered_map

logger = logging.getLogger(__name__)


@dataclass
class MiningResult:
    additions: List[ManifestRecord] = field(default_factory=list)
    skipped: List[str] = field(default_factory=list)

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)


def select_hard_windows(scores: Sequence[float], tau: float, cap: Optional[int] = None) -> List[int]:
    """
    Indices of windows scoring at least ``tau``, highest first

    Ties keep the earlier window first; at most ``cap`` indices are returned.

    Examples:
        >>> select_hard_windows([0.1, 0.95, 0.2, 0.9], 0.8)
        [1, 3]
    """
    scores = np.asarray(scores, dtype=np.float64)
    candidates = np.flatnonzero(scores >= tau)
    # stable sort on the negated score keeps index order among ties
    order = candidates[np.argsort(-scores[candidates], kind='stable')]
    if cap is not None:
        order = order[:cap]
    return [int(i) for i in order]


def _mine_file(record: ManifestRecord, scorer: WindowScorer, tau: float, cap: Optional[int],
               cfg: StreamConfig) -> Tuple[List[ManifestRecord], Optional[str]]:
    try:
        clip = load_wav(record.path)
    except DataError as e:
        logger.warning("Skipping unreadable file", extra={'path': record.path, 'error': e.message})
        return [], record.path

    track = stream_scores(clip, scorer, cfg, source=record.path)
    additions = [
        ManifestRecord(
            path=record.path,
            label="negative",
            split=record.split,
            offset_s=round(float(track.times_s[i]) - cfg.window_s, 6),
            score=float(track.scores[i]),
            extra={'mined': True},
        )
        for i in select_hard_windows(track.scores, tau, cap)
    ]
    return additions, None


def mine_hard_negatives(
    scorer: WindowScorer,
    records: Sequence[ManifestRecord],
    tau: float,
    cap: Optional[int] = None,
    cfg: StreamConfig = StreamConfig(),
    workers: int = 1
) -> MiningResult:
    """
    Collect high-scoring windows of a keyword-free corpus as new negatives

    Each file is stream-scored; windows with score >= ``tau`` become
    negative manifest records (file + window offset), highest score first
    and at most ``cap`` per file. Unreadable files are skipped and counted.
    Continue training by re-running train on the extended manifest.

    Args:
        scorer: Pre-converged model
        records: Corpus files (no true keyword occurrences)
        tau: Score threshold
        cap: Per-file limit (unlimited when None)
        cfg: Window geometry
        workers: Files scored concurrently; output order follows ``records``

    Returns:
        MiningResult with additions in manifest order and skipped paths
    """
    results = ordered_map(lambda r: _mine_file(r, scorer, tau, cap, cfg), records, workers)

    result = MiningResult()
    for additions, skipped in results:
        result.additions.extend(additions)
        if skipped is not None:
            result.skipped.append(skipped)

    if result.skipped:
        logger.warning("Skipped unreadable files while mining", extra={'skipped': result.skipped_count})
    logger.info("Mining complete", extra={
        'files': len(records), 'additions': len(result.additions), 'tau': tau, 'cap': cap,
    })
    return result


__all__ = ['MiningResult', 'select_hard_windows', 'mine_hard_negatives']
