"""
Alignment Service - keyword begin/end from character posteriors
"""
import logging
import os
from typing import Optional, Tuple, Union

import numpy as np
from scipy.ndimage import uniform_filter1d

from app.core.errors import AlignmentError, ConfigError, DataError
from app.models.alignment import AlignConfig, AlignmentSpan, CharPosteriorMatrix
from app.models.audio import AudioClip
from app.repositories.posterior_repository import load_posteriors

logger = logging.getLogger(__name__)


# ==================== SMOOTHING ====================

def smooth_scores(
    raw: Union[CharPosteriorMatrix, np.ndarray],
    window: int,
    chars: Optional[str] = None,
    frame_rate: float = 100.0
) -> CharPosteriorMatrix:
    """
    Centered moving average of every character row

    Edge frames are divided by the number of frames actually inside the
    window, so constant rows are preserved.

    Args:
        raw: Posterior matrix, or a K x T array
        window: Odd window width in frames
        chars: Characters for an array input ('?' per row when omitted)
        frame_rate: Frames per second for an array input

    Raises:
        ConfigError: Even or non-positive window

    Examples:
        >>> smooth_scores(np.array([[0, 0, 1, 0, 0]]), 3).scores
        array([[0.        , 0.33333333, 0.33333333, 0.33333333, 0.        ]])
    """
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"smoothing window must be odd and >= 1, got {window}")

    if isinstance(raw, CharPosteriorMatrix):
        chars, frame_rate, origin, scores = raw.chars, raw.frame_rate, raw.origin_time_s, raw.scores
    else:
        scores = np.asarray(raw, dtype=np.float64)
        origin = 0.0
        if chars is None and scores.ndim == 2:
            chars = "?" * scores.shape[0]

    scores = np.array(scores, dtype=np.float64)
    if np.any(scores < 0):
        raise DataError("posterior scores must be nonnegative")
    if window == 1 or scores.ndim != 2:
        return CharPosteriorMatrix(chars, scores, frame_rate, origin)

    sums = uniform_filter1d(scores, size=window, axis=1, mode='constant', cval=0.0)
    counts = uniform_filter1d(np.ones(scores.shape[1]), size=window, mode='constant', cval=0.0)
    return CharPosteriorMatrix(chars, sums / counts, frame_rate, origin)


# ==================== DECAY ALIGNMENT ====================

def _first_argmax(row: np.ndarray) -> int:
    # np.argmax returns the first maximal index
    return int(np.argmax(row))


def align_keyword(posteriors: CharPosteriorMatrix, cfg: AlignConfig = AlignConfig()) -> AlignmentSpan:
    """
    Locate the keyword in a posterior matrix with the two-pass decay heuristic

    Two working copies start equal to the scores. Each iteration runs a
    forward pass on one copy (the peak of character k damps character k+1
    from that frame on) and a backward pass on the other (the peak of
    character k damps character k-1 up to that frame). The span is then
    read from the first and last character rows of both copies.

    Args:
        posteriors: K x T character occupancy scores
        cfg: Decay rate and iteration count

    Returns:
        AlignmentSpan; ``ordered`` is False when begin lands after end

    Examples:
        >>> p = CharPosteriorMatrix("ab", [[.9, .3, .1, .1], [.1, .2, .3, .9]], 100.0)
        >>> span = align_keyword(p, AlignConfig(alpha=0.5, n_iter=1))
        >>> (span.begin_frame, span.end_frame, span.ordered)
        (0, 3, True)
    """
    forward = posteriors.scores.copy()
    backward = posteriors.scores.copy()
    n_chars = posteriors.n_chars
    alpha = cfg.alpha

    for _ in range(cfg.n_iter):
        for k in range(n_chars - 1):
            peak = _first_argmax(forward[k])
            forward[k + 1, peak:] *= alpha
        for k in range(n_chars - 1, 0, -1):
            peak = _first_argmax(backward[k])
            backward[k - 1, :peak + 1] *= alpha

    begin = min(_first_argmax(backward[0]), _first_argmax(forward[0]))
    end = max(_first_argmax(backward[-1]), _first_argmax(forward[-1]))

    span = AlignmentSpan(
        begin_frame=begin,
        end_frame=end,
        begin_s=posteriors.frame_to_seconds(begin),
        end_s=posteriors.frame_to_seconds(end),
    )
    if not span.ordered:
        logger.warning("Alignment produced begin after end", extra={'begin': begin, 'end': end})
    return span


def chop_keyword(clip: AudioClip, span: AlignmentSpan, pad_s: float = 0.1) -> AudioClip:
    """
    Cut [begin_s - pad_s, end_s + pad_s] out of a clip, clamped to its bounds

    Raises:
        AlignmentError: Span with begin after end
    """
    if not span.ordered:
        raise AlignmentError(
            f"cannot chop unordered span ({span.begin_s:.3f}s > {span.end_s:.3f}s)",
            payload={'begin_s': span.begin_s, 'end_s': span.end_s}
        )
    return clip.slice_seconds(span.begin_s - pad_s, span.end_s + pad_s)


def chop_bounds(clip: AudioClip, span: AlignmentSpan, pad_s: float) -> Tuple[float, float]:
    """Clamped [start, end] seconds that chop_keyword extracts"""
    return max(span.begin_s - pad_s, 0.0), min(span.end_s + pad_s, clip.duration_s)


def audio_path_for(posterior_path: str) -> str:
    """Recording a posterior file belongs to: same stem, .wav suffix"""
    return os.path.splitext(posterior_path)[0] + ".wav"


def align_file(path: str, cfg: AlignConfig = AlignConfig()) -> dict:
    """
    Smooth and align one CPST file

    Returns:
        Span record {path, posteriors, begin_s, end_s, ordered, begin_frame, end_frame}
    """
    smoothed = smooth_scores(load_posteriors(path), cfg.smooth_window)
    span = align_keyword(smoothed, cfg)
    rv = {'path': audio_path_for(path), 'posteriors': path}
    rv.update(span.to_dict())
    return rv


__all__ = [
    'smooth_scores',
    'align_keyword',
    'chop_keyword',
    'chop_bounds',
    'audio_path_for',
    'align_file',
]
