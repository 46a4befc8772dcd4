# tests/unit/test_alignment.py
import numpy as np
import pytest

from app.core.errors import AlignmentError, ConfigError, DataError
from app.models.alignment import AlignConfig, AlignmentSpan, CharPosteriorMatrix
from app.models.audio import AudioClip
from app.services.alignment_service import (
    align_file,
    align_keyword,
    audio_path_for,
    chop_bounds,
    chop_keyword,
    smooth_scores,
)
from app.repositories.posterior_repository import save_posteriors


def _argmax_first(values):
    best, idx = values[0], 0
    for t, v in enumerate(values):
        if v > best:
            best, idx = v, t
    return idx


def _literal_align(scores, alpha, n_iter):
    """Element-by-element decay heuristic"""
    k_count, steps = scores.shape
    fwd = [list(row) for row in scores]
    bwd = [list(row) for row in scores]
    for _ in range(n_iter):
        for k in range(k_count - 1):
            peak = _argmax_first(fwd[k])
            for t in range(peak, steps):
                fwd[k + 1][t] *= alpha
        for k in range(k_count - 1, 0, -1):
            peak = _argmax_first(bwd[k])
            for t in range(0, peak + 1):
                bwd[k - 1][t] *= alpha
    begin = min(_argmax_first(bwd[0]), _argmax_first(fwd[0]))
    end = max(_argmax_first(bwd[-1]), _argmax_first(fwd[-1]))
    return begin, end


class TestSmoothing:
    """Test suite for the moving-average smoother"""

    def test_impulse(self):
        """Test a centered impulse spreads over the window"""
        out = smooth_scores(np.array([[0.0, 0.0, 3.0, 0.0, 0.0]]), 3).scores
        np.testing.assert_allclose(out, [[0.0, 1.0, 1.0, 1.0, 0.0]])

    def test_constant_rows_preserved(self):
        """Test edge frames are averaged over the frames actually present"""
        out = smooth_scores(np.full((2, 6), 0.4), 5).scores
        np.testing.assert_allclose(out, 0.4)

    def test_window_one_is_identity(self, rng):
        """Test window 1 leaves scores unchanged"""
        scores = rng.uniform(0, 1, (3, 10))
        np.testing.assert_allclose(smooth_scores(scores, 1).scores, scores)

    @pytest.mark.parametrize("window", [0, 2, 4])
    def test_invalid_window(self, window):
        """Test even or nonpositive windows are rejected"""
        with pytest.raises(ConfigError):
            smooth_scores(np.ones((1, 5)), window)

    def test_negative_scores_rejected(self):
        """Test negative posteriors raise DataError"""
        with pytest.raises(DataError):
            smooth_scores(np.array([[0.1, -0.2]]), 1)

    def test_keeps_matrix_metadata(self):
        """Test characters, frame rate and origin survive smoothing"""
        matrix = CharPosteriorMatrix("ab", np.ones((2, 4)), 50.0, 1.5)
        out = smooth_scores(matrix, 3)
        assert (out.chars, out.frame_rate, out.origin_time_s) == ("ab", 50.0, 1.5)


class TestAlignKeyword:
    """Test suite for the decay alignment heuristic"""

    def test_simple_ordered(self):
        """Test a clean two-character matrix"""
        p = CharPosteriorMatrix("ab", [[0.9, 0.3, 0.1, 0.1], [0.1, 0.2, 0.3, 0.9]], 100.0)
        span = align_keyword(p, AlignConfig(alpha=0.5, n_iter=1))
        assert (span.begin_frame, span.end_frame) == (0, 3)
        assert span.begin_s == pytest.approx(0.0)
        assert span.end_s == pytest.approx(0.03)
        assert span.ordered

    def test_matches_literal_reference(self):
        """Test vectorized decay equals the per-element definition on 1000 random matrices"""
        rng = np.random.default_rng(42)
        for _ in range(1000):
            k = int(rng.integers(1, 6))
            steps = int(rng.integers(1, 25))
            alpha = float(rng.uniform(0.0, 1.0))
            n_iter = int(rng.integers(1, 4))
            scores = rng.uniform(0, 1, (k, steps))
            span = align_keyword(CharPosteriorMatrix("x" * k, scores, 100.0), AlignConfig(alpha=alpha, n_iter=n_iter))
            assert (span.begin_frame, span.end_frame) == _literal_align(scores, alpha, n_iter)

    def test_matches_literal_reference_on_alpha_grid(self):
        """Test the decay grid alpha in {0, 0.25, 0.5, 1} against the per-element definition"""
        rng = np.random.default_rng(2024)
        alphas = (0.0, 0.25, 0.5, 1.0)
        for i in range(1000):
            alpha = alphas[i % len(alphas)]
            k = int(rng.integers(1, 6))
            steps = int(rng.integers(1, 51))
            n_iter = int(rng.integers(1, 4))
            scores = rng.uniform(0, 1, (k, steps))
            span = align_keyword(CharPosteriorMatrix("x" * k, scores, 100.0), AlignConfig(alpha=alpha, n_iter=n_iter))
            assert (span.begin_frame, span.end_frame) == _literal_align(scores, alpha, n_iter)

    def test_worked_unordered_example(self):
        """Test a matrix whose last character peaks first yields an unordered (1, 0) span"""
        p = CharPosteriorMatrix("ab", [[0.2, 0.9, 0.1, 0.1], [0.85, 0.1, 0.8, 0.1]], 100.0)
        span = align_keyword(p, AlignConfig(alpha=0.5, n_iter=1))
        assert (span.begin_frame, span.end_frame) == (1, 0)
        assert not span.ordered

    def test_alpha_one_is_plain_argmax(self, rng):
        """Test no decay reduces to argmax of the first and last rows"""
        scores = rng.uniform(0, 1, (4, 30))
        span = align_keyword(CharPosteriorMatrix("abcd", scores, 100.0), AlignConfig(alpha=1.0))
        assert span.begin_frame == int(np.argmax(scores[0]))
        assert span.end_frame == int(np.argmax(scores[-1]))

    def test_scale_invariant(self, rng):
        """Test scaling all scores leaves the span unchanged"""
        scores = rng.uniform(0, 1, (3, 20))
        a = align_keyword(CharPosteriorMatrix("abc", scores, 100.0))
        b = align_keyword(CharPosteriorMatrix("abc", scores * 37.0, 100.0))
        assert (a.begin_frame, a.end_frame) == (b.begin_frame, b.end_frame)

    def test_alpha_one_on_many_matrices(self):
        """Test alpha = 1 gives first-maximum argmax of the end rows for any shape and iteration count"""
        rng = np.random.default_rng(5)
        for _ in range(500):
            k = int(rng.integers(1, 6))
            steps = int(rng.integers(1, 51))
            scores = np.round(rng.uniform(0, 1, (k, steps)), 1)
            span = align_keyword(CharPosteriorMatrix("x" * k, scores, 100.0),
                                 AlignConfig(alpha=1.0, n_iter=int(rng.integers(1, 4))))
            assert span.begin_frame == int(np.argmax(scores[0]))
            assert span.end_frame == int(np.argmax(scores[-1]))

    def test_scale_invariant_on_many_matrices(self):
        """Test power-of-two rescaling never moves the span"""
        rng = np.random.default_rng(6)
        for _ in range(500):
            k = int(rng.integers(1, 6))
            scores = rng.uniform(0, 1, (k, int(rng.integers(1, 51))))
            cfg = AlignConfig(alpha=float(rng.uniform(0, 1)), n_iter=int(rng.integers(1, 4)))
            scale = 2.0 ** int(rng.integers(-8, 9))
            a = align_keyword(CharPosteriorMatrix("x" * k, scores, 100.0), cfg)
            b = align_keyword(CharPosteriorMatrix("x" * k, scores * scale, 100.0), cfg)
            assert (a.begin_frame, a.end_frame) == (b.begin_frame, b.end_frame)

    def test_origin_offsets_seconds(self):
        """Test frame times include the matrix origin"""
        p = CharPosteriorMatrix("a", [[0.0, 1.0, 0.0]], 100.0, origin_time_s=2.0)
        span = align_keyword(p)
        assert span.begin_s == pytest.approx(2.01)

    def test_unordered_span_flagged(self):
        """Test begin after end is reported rather than swapped"""
        p = CharPosteriorMatrix("ab", [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]], 100.0)
        span = align_keyword(p, AlignConfig(alpha=1.0))
        assert not span.ordered


class TestChop:
    """Test suite for cutting keyword clips"""

    def test_padded_and_clamped(self):
        """Test padding is applied and clamped to the clip"""
        clip = AudioClip(np.ones(16000))
        span = AlignmentSpan(begin_frame=5, end_frame=50, begin_s=0.05, end_s=0.5)
        out = chop_keyword(clip, span, pad_s=0.1)
        assert len(out) == 9600
        assert chop_bounds(clip, span, 0.1) == pytest.approx((0.0, 0.6))

    def test_unordered_span_rejected(self):
        """Test chopping a begin-after-end span raises AlignmentError"""
        span = AlignmentSpan(begin_frame=50, end_frame=5, begin_s=0.5, end_s=0.05)
        with pytest.raises(AlignmentError):
            chop_keyword(AudioClip(np.ones(16000)), span)


class TestAlignFile:
    """Test suite for aligning CPST files"""

    def test_audio_path(self):
        """Test the recording path is derived from the posterior path"""
        assert audio_path_for("/data/utt1.cpst") == "/data/utt1.wav"

    def test_align_file_record(self, tmp_path):
        """Test the span record written for one file"""
        scores = np.full((2, 40), 0.01)
        scores[0, 10] = 1.0
        scores[1, 30] = 1.0
        path = str(tmp_path / "utt.cpst")
        save_posteriors(path, CharPosteriorMatrix("ok", scores, 100.0))

        record = align_file(path, AlignConfig(smooth_window=1))
        assert record['path'] == str(tmp_path / "utt.wav")
        assert record['begin_s'] == pytest.approx(0.10, abs=1e-6)
        assert record['end_s'] == pytest.approx(0.30, abs=1e-6)
        assert record['ordered'] is True
