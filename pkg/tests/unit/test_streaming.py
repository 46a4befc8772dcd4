# tests/unit/test_streaming.py
import csv
import math

import numpy as np
import pytest

from app.core.errors import ConfigError, EmptyEvaluationError
from app.models.audio import AudioClip
from app.models.augmentation import ImpulseResponse
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
from app.repositories.wav_repository import write_wav
from app.services.streaming_service import (
    condition_rng,
    degrade_clip,
    det_curve,
    det_thresholds,
    detect,
    evaluate,
    frr_at_target_fa,
    match_detections,
    negative_audio_s,
    stream_scores,
    window_classes,
    window_level_eer,
    window_starts,
    write_report_csv,
)
from app.utils.profiling import get_profiler
from tests.conftest import ConstantScorer, StubScorer


def _events(*times):
    return [DetectionEvent(time_s=t, score=1.0) for t in times]


class TestWindows:
    """Test suite for sliding window geometry"""

    def test_window_count(self):
        """Test full windows only"""
        starts = window_starts(40000, 24000, 1600)
        assert len(starts) == 11
        assert starts[-1] == 16000

    def test_shorter_than_window(self):
        """Test a clip one sample short gives no windows"""
        assert len(window_starts(23999, 24000, 1600)) == 0

    def test_stream_scores_times(self, tone_clip, stub_scorer):
        """Test window end times and score count"""
        clip = AudioClip(np.tile(tone_clip.samples, 3)[:64000])
        track = stream_scores(clip, stub_scorer, StreamConfig())
        assert len(track) == 26
        assert track.times_s[0] == pytest.approx(1.5)
        np.testing.assert_allclose(np.diff(track.times_s), 0.1)

    def test_stream_scores_short_clip(self, stub_scorer):
        """Test a sub-window clip yields an empty track"""
        track = stream_scores(AudioClip(np.zeros(16000)), stub_scorer)
        assert len(track) == 0
        assert stub_scorer.calls == 0

    def test_window_latency_recorded(self, tone_clip, stub_scorer):
        """Test streaming records one latency sample per window"""
        profiler = get_profiler()
        profiler.reset()
        stream_scores(AudioClip(np.tile(tone_clip.samples, 2)), stub_scorer, StreamConfig())
        stats = profiler.get_stats("stream_window")
        assert stats["count"] == 16
        assert stats["max_ms"] >= stats["median_ms"] >= 0.0

    def test_windows_scored_independently(self, rng):
        """Test each window score depends only on its own samples"""
        clip = AudioClip(rng.normal(0, 0.1, 40000))
        scorer = StubScorer()
        full = stream_scores(clip, scorer, StreamConfig())
        head = stream_scores(AudioClip(clip.samples[:24000]), scorer, StreamConfig())
        assert full.scores[0] == head.scores[0]


class TestDetect:
    """Test suite for thresholding with a refractory period"""

    def test_refractory_suppresses_neighbors(self):
        """Test only the first of adjacent high scores fires"""
        events = detect([(1.5, 0.1), (1.6, 0.95), (1.7, 0.9), (1.8, 0.2)], 0.8, 1.0)
        assert events == [DetectionEvent(time_s=1.6, score=0.95)]

    def test_fires_again_after_refractory(self):
        """Test a score more than refractory_s later fires"""
        pairs = [(t / 10.0, 0.9) for t in range(15, 40)]
        events = detect(pairs, 0.5, 1.0)
        assert [round(e.time_s, 6) for e in events] == [1.5, 2.6, 3.7]

    def test_threshold_inclusive(self):
        """Test a score equal to the threshold fires"""
        assert len(detect([(1.5, 0.5)], 0.5, 1.0)) == 1

    def test_zero_refractory(self):
        """Test every qualifying window fires without a refractory period"""
        assert len(detect([(1.5, 0.9), (1.6, 0.9), (1.7, 0.9)], 0.5, 0.0)) == 3

    def test_empty(self):
        """Test no scores give no events"""
        assert detect([], 0.5, 1.0) == []
        assert detect(ScoreTrack([], []), 0.5, 1.0) == []


class TestMatching:
    """Test suite for matching detections to keyword spans"""

    def test_hits_ignores_and_false_alarms(self):
        """Test a hand-checked mix of outcomes"""
        truth = GroundTruth(spans=[(2.0, 2.5), (7.0, 7.4)], total_negative_audio_s=60.0)
        result = match_detections(_events(2.6, 2.9, 5.0, 7.4), truth, 0.75)
        assert (result.hits, result.misses, result.false_alarms) == (2, 0, 1)
        assert result.fa_per_hour == pytest.approx(60.0)

    def test_early_event_inside_region_ignored(self):
        """Test an event before the end window but inside the keyword region"""
        truth = GroundTruth(spans=[(2.0, 2.5)], total_negative_audio_s=10.0)
        result = match_detections(_events(1.5), truth, 0.75)
        assert (result.hits, result.misses, result.false_alarms) == (0, 1, 0)
        assert result.frr_percent == 100.0

    def test_one_event_per_keyword(self):
        """Test each keyword is matched at most once"""
        truth = GroundTruth(spans=[(2.0, 2.5)], total_negative_audio_s=10.0)
        result = match_detections(_events(2.3, 2.7), truth, 0.75)
        assert (result.hits, result.false_alarms) == (1, 0)

    def test_earliest_ending_keyword_first(self):
        """Test an event between two keywords takes the earlier one"""
        truth = GroundTruth(spans=[(1.0, 1.5), (1.6, 2.0)], total_negative_audio_s=10.0)
        result = match_detections(_events(1.8, 2.1), truth, 0.75)
        assert (result.hits, result.misses) == (2, 0)

    def test_nothing_to_evaluate(self):
        """Test no keywords and no negative audio is rejected"""
        with pytest.raises(EmptyEvaluationError):
            match_detections([], GroundTruth())

    def test_negative_audio(self):
        """Test keyword time is excluded from the negative duration"""
        assert negative_audio_s(10.0, [(1.0, 1.5), (4.0, 4.25)]) == pytest.approx(9.25)
        assert negative_audio_s(1.0, [(0.0, 2.0)]) == 0.0


class TestDetCurve:
    """Test suite for DET operating points"""

    def _random_files(self, rng, seconds=30.0, decimals=None):
        files = []
        for _ in range(int(rng.integers(1, 4))):
            times = np.arange(15, int(seconds * 10)) / 10.0
            scores = rng.uniform(0, 1, times.size)
            if decimals is not None:
                scores = np.round(scores, decimals)
            starts = [s for s in np.arange(3.0, seconds - 2.0, 5.0) if rng.uniform() < 0.5]
            spans = [(float(s), float(s + rng.uniform(0.2, 0.8))) for s in starts]
            truth = GroundTruth(spans=spans, total_negative_audio_s=negative_audio_s(seconds, spans))
            files.append((ScoreTrack(times, scores), truth))
        return files

    def test_monotone_on_random_sets(self):
        """Test FA/hour never falls and FRR never rises as the threshold decreases"""
        rng = np.random.default_rng(7)
        for _ in range(100):
            report = det_curve(self._random_files(rng), StreamConfig())
            assert np.all(np.diff(report.thresholds) < 0)
            assert np.all(np.diff(report.fa_per_hour) >= -1e-9)
            assert np.all(np.diff(report.frr_percent) <= 1e-9)

    def test_matches_detect_at_every_threshold(self):
        """Test raw counts equal detect plus match_detections run threshold by threshold"""
        rng = np.random.default_rng(11)
        for case in range(20):
            refractory = [0.0, 0.3, 1.0, 2.0][case % 4]
            cfg = StreamConfig(refractory_s=refractory)
            files = self._random_files(rng, seconds=12.0, decimals=2 if case % 2 else None)
            report = det_curve(files, cfg)

            all_scores = np.concatenate([track.scores for track, _ in files])
            assert report.thresholds.tolist() == det_thresholds(all_scores).tolist()
            for point in report.points:
                total = MatchResult()
                for track, truth in files:
                    events = detect(track, point.threshold, refractory)
                    total = total + match_detections(events, truth, cfg.tolerance_s)
                raw_fa, raw_frr = point.measured
                assert raw_fa == pytest.approx(total.fa_per_hour)
                assert raw_frr == pytest.approx(total.frr_percent)

    def test_endpoints(self):
        """Test 1.0 fires only on perfect scores and the lowest threshold fires everywhere"""
        truth = GroundTruth(spans=[(2.0, 2.4)], total_negative_audio_s=9.6)
        track = ScoreTrack([1.0, 2.5, 5.0, 8.0], [0.2, 0.9, 0.4, 0.3])
        report = det_curve([(track, truth)], StreamConfig())
        assert report.thresholds.tolist() == [1.0, 0.9, 0.4, 0.3, 0.2]
        np.testing.assert_allclose(report.fa_per_hour, [0.0, 0.0, 375.0, 750.0, 1125.0])
        np.testing.assert_allclose(report.frr_percent, [100.0, 0.0, 0.0, 0.0, 0.0])

    def test_refractory_envelope(self):
        """Test a hit suppressed by an earlier false alarm shows in the raw values only"""
        truth = GroundTruth(spans=[(2.6, 2.8)], total_negative_audio_s=3.6)
        track = ScoreTrack([1.6, 2.4, 3.0], [0.5, 0.9, 0.3])
        report = det_curve([(track, truth)], StreamConfig())

        assert report.thresholds.tolist() == [1.0, 0.9, 0.5, 0.3]
        np.testing.assert_allclose([p.measured[0] for p in report.points], [0.0, 0.0, 1000.0, 1000.0])
        np.testing.assert_allclose([p.measured[1] for p in report.points], [100.0, 0.0, 100.0, 0.0])
        np.testing.assert_allclose(report.fa_per_hour, [0.0, 0.0, 1000.0, 1000.0])
        np.testing.assert_allclose(report.frr_percent, [100.0, 100.0, 100.0, 0.0])

    def test_thresholds_keep_every_score(self, rng):
        """Test every unique score becomes a threshold, in descending order"""
        scores = rng.uniform(0, 0.99, 5000)
        thresholds = det_thresholds(np.concatenate([scores, scores[:10]]))
        assert thresholds.size == np.unique(scores).size + 1
        assert thresholds[0] == 1.0
        assert thresholds[-1] == scores.min()
        assert np.all(np.diff(thresholds) < 0)

    def test_large_score_set(self, rng):
        """Test a file with more than 2000 distinct scores keeps its single best window"""
        times = 1.5 + np.arange(5001) / 10.0
        scores = rng.uniform(0, 0.9, times.size)
        k = 2500
        scores[k] = 0.95
        truth = GroundTruth(spans=[(times[k] - 0.6, times[k] - 0.1)],
                            total_negative_audio_s=negative_audio_s(times[-1], [(times[k] - 0.6, times[k] - 0.1)]))
        report = det_curve([(ScoreTrack(times, scores), truth)], StreamConfig())

        assert len(report.points) == np.unique(scores).size + 1
        assert report.points[1].threshold == 0.95
        assert report.points[1].measured == (0.0, 0.0)
        assert report.points[-1].fa_per_hour > 0.0

    def test_empty_set_rejected(self):
        """Test files with nothing to score are rejected"""
        with pytest.raises(EmptyEvaluationError):
            det_curve([(ScoreTrack([1.5], [0.1]), GroundTruth())])

    def test_unreachable_target(self):
        """Test FRR is infinite when no point meets the FA target"""
        report = EvalReport(points=[OperatingPoint(1.0, 2.0, 50.0), OperatingPoint(0.5, 3.0, 0.0)])
        assert frr_at_target_fa(report, 1.0) == math.inf
        assert frr_at_target_fa(report, 2.0) == 50.0

        report.frr_at_targets = {1.0: math.inf}
        assert report.summary()['frr_at_fa_per_hour'] == {'1.0': None}


class TestWindowEer:
    """Test suite for window-level equal error rate"""

    def test_separable(self):
        """Test perfectly separated classes give zero EER"""
        assert window_level_eer([0.9, 0.8], [0.1, 0.2]) == pytest.approx(0.0)

    def test_indistinguishable(self):
        """Test identical scores give 0.5"""
        assert window_level_eer([0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.5)

    def test_missing_class(self):
        """Test None without both classes"""
        assert window_level_eer([], [0.1]) is None

    def test_window_classes(self):
        """Test partially overlapping windows are left out"""
        track = ScoreTrack([1.5, 2.0, 2.25, 3.0], [0.1, 0.2, 0.3, 0.4])
        positive, negative = window_classes(track, [(0.5, 1.0)], 1.5)
        assert positive.tolist() == [0.1, 0.2]
        assert negative.tolist() == [0.4]


class TestEvaluate:
    """Test suite for end-to-end streaming evaluation"""

    def _records(self, tmp_path, rng):
        keyword = str(tmp_path / "kw.wav")
        background = str(tmp_path / "bg.wav")
        write_wav(keyword, AudioClip(rng.normal(0, 0.05, 80000)))
        write_wav(background, AudioClip(rng.normal(0, 0.05, 80000)))
        return [
            ManifestRecord(path=keyword, split="test", spans_s=[(2.0, 2.5)]),
            ManifestRecord(path=background, split="test", spans_s=[]),
        ]

    def test_constant_scorer(self, tmp_path, rng):
        """Test the report of a scorer that always fires"""
        report, scored = evaluate(self._records(tmp_path, rng), ConstantScorer(0.9), StreamConfig())

        assert len(scored) == 2
        assert scored[0].truth.total_negative_audio_s == pytest.approx(4.5)
        assert report.thresholds.tolist() == [1.0, 0.9]
        assert report.points[0].frr_percent == 100.0
        assert report.points[0].fa_per_hour == 0.0
        assert report.points[1].frr_percent == 0.0
        assert report.points[1].fa_per_hour > 1.0
        assert report.frr_at_targets[1.0] == 100.0
        assert report.window_eer == pytest.approx(0.5)

        summary = report.summary()
        assert summary['n_points'] == 2
        assert summary['accuracy_at_fa_per_hour']['0.5'] == 0.0

    def test_workers_do_not_change_results(self, tmp_path, rng):
        """Test concurrent scoring keeps manifest order and values"""
        records = self._records(tmp_path, rng)
        a, _ = evaluate(records, StubScorer(), workers=1)
        b, _ = evaluate(records, StubScorer(), workers=2)
        assert a.points == b.points

    def test_empty_manifest(self):
        """Test an empty evaluation set is rejected"""
        with pytest.raises(EmptyEvaluationError):
            evaluate([], StubScorer())

    def test_report_csv(self, tmp_path):
        """Test the DET CSV header and rows"""
        path = str(tmp_path / "det.csv")
        write_report_csv(path, EvalReport(points=[OperatingPoint(0.5, 1.0, 12.5)]))
        with open(path) as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ['threshold', 'fa_per_hour', 'frr_percent', 'raw_fa_per_hour', 'raw_frr_percent']
        assert rows[1] == ['0.5', '1.000000', '12.500000', '1.000000', '12.500000']

    def test_report_csv_raw_columns(self, tmp_path):
        """Test measured values that differ from the curve get their own columns"""
        path = str(tmp_path / "det.csv")
        write_report_csv(path, EvalReport(points=[OperatingPoint(0.5, 2.0, 50.0, 1.0, 0.0)]))
        with open(path) as handle:
            rows = list(csv.reader(handle))
        assert rows[1] == ['0.5', '2.000000', '50.000000', '1.000000', '0.000000']


class TestConditions:
    """Test suite for noisy and far-field evaluation conditions"""

    def _clip(self, rng, n=32000):
        t = np.arange(n) / 16000.0
        return AudioClip(0.1 * np.sin(2 * np.pi * 440.0 * t) + rng.normal(0, 0.001, n))

    def test_names(self):
        """Test condition names used for report files"""
        assert CLEAN.name == "clean" and CLEAN.is_clean
        assert EvalCondition.from_snr(5).name == "snr5"
        assert EvalCondition.from_snr(-5.0).name == "snr-5"
        assert EvalCondition.from_snr(2.5).name == "snr2.5"
        assert EvalCondition.far_field().name == "rir"
        assert not EvalCondition.far_field().is_clean

    def test_clean_is_identity(self, rng):
        """Test the clean condition leaves the recording untouched"""
        clip = self._clip(rng)
        assert degrade_clip(clip, CLEAN) is clip

    def test_realized_snr(self, rng):
        """Test the added noise sits at the requested SNR"""
        clip = self._clip(rng)
        noise = [AudioClip(rng.normal(0, 0.02, 16000))]
        mixed = degrade_clip(clip, EvalCondition.from_snr(5.0), noise, rng=condition_rng(0, 3))
        added = mixed.samples - clip.samples
        realized = 10.0 * np.log10(np.mean(clip.samples ** 2) / np.mean(added ** 2))
        assert realized == pytest.approx(5.0, abs=1e-6)

    def test_same_index_same_degradation(self, rng):
        """Test file degradation depends only on seed and file index"""
        clip = self._clip(rng)
        noise = [AudioClip(rng.normal(0, 0.02, 8000)), AudioClip(rng.normal(0, 0.05, 8000))]
        condition = EvalCondition.from_snr(0.0)
        a = degrade_clip(clip, condition, noise, rng=condition_rng(7, 2))
        b = degrade_clip(clip, condition, noise, rng=condition_rng(7, 2))
        c = degrade_clip(clip, condition, noise, rng=condition_rng(7, 3))
        np.testing.assert_array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_delta_response_far_field(self, rng):
        """Test a unit impulse response is an exact identity"""
        clip = self._clip(rng)
        delta = ImpulseResponse(np.array([1.0, 0.0, 0.0]), 16000)
        out = degrade_clip(clip, EvalCondition.far_field(), rirs=[delta], rng=condition_rng(0, 0))
        np.testing.assert_array_equal(out.samples, clip.samples)

    def test_far_field_applies_response(self, rng):
        """Test a delayed impulse response shifts the recording"""
        clip = self._clip(rng)
        delayed = ImpulseResponse(np.array([0.0, 0.0, 1.0]), 16000)
        out = degrade_clip(clip, EvalCondition.far_field(), rirs=[delayed], rng=condition_rng(0, 0))
        np.testing.assert_allclose(out.samples[2:], clip.samples[:-2])
        assert out.samples[:2].tolist() == [0.0, 0.0]

    def test_missing_pools(self, rng):
        """Test conditions without their pool are configuration errors"""
        clip = self._clip(rng)
        with pytest.raises(ConfigError):
            degrade_clip(clip, EvalCondition.from_snr(5.0))
        with pytest.raises(ConfigError):
            degrade_clip(clip, EvalCondition.far_field())

    def test_silent_noise_keeps_recording(self, rng, caplog):
        """Test a silent noise clip leaves the recording clean with a warning"""
        clip = self._clip(rng)
        with caplog.at_level("WARNING", logger="app.services.streaming_service"):
            out = degrade_clip(clip, EvalCondition.from_snr(5.0), [AudioClip(np.zeros(16000))],
                               rng=condition_rng(0, 0), source="a.wav")
        np.testing.assert_array_equal(out.samples, clip.samples)
        assert "Noise mixing skipped" in caplog.text

    def _records(self, tmp_path, rng):
        paths = []
        for name in ("kw", "bg", "bg2"):
            path = str(tmp_path / f"{name}.wav")
            write_wav(path, AudioClip(rng.normal(0, 0.05, 48000)))
            paths.append(path)
        return [
            ManifestRecord(path=paths[0], split="test", spans_s=[(1.5, 2.0)]),
            ManifestRecord(path=paths[1], split="test", spans_s=[]),
            ManifestRecord(path=paths[2], split="test", spans_s=[]),
        ]

    def test_noisy_evaluation(self, tmp_path, rng):
        """Test a noisy condition keeps the clean truth and names the report"""
        records = self._records(tmp_path, rng)
        noise = [AudioClip(rng.normal(0, 0.1, 16000))]
        clean, clean_scored = evaluate(records, StubScorer())
        report, scored = evaluate(records, StubScorer(), condition=EvalCondition.from_snr(-5.0),
                                  noise_pool=noise, seed=3)
        assert report.condition == "snr-5"
        assert report.summary()['condition'] == "snr-5"
        assert clean.condition == "clean"
        assert [f.truth for f in scored] == [f.truth for f in clean_scored]

    def test_noisy_evaluation_ignores_workers(self, tmp_path, rng):
        """Test noisy reports do not depend on the worker count"""
        records = self._records(tmp_path, rng)
        noise = [AudioClip(rng.normal(0, 0.1, 16000)), AudioClip(rng.normal(0, 0.02, 16000))]
        condition = EvalCondition.from_snr(0.0)
        a, _ = evaluate(records, StubScorer(), condition=condition, noise_pool=noise, seed=1, workers=1)
        b, _ = evaluate(records, StubScorer(), condition=condition, noise_pool=noise, seed=1, workers=3)
        assert a.points == b.points

    def test_noisy_evaluation_needs_pool(self, tmp_path, rng):
        """Test an SNR condition without noise fails before reporting"""
        with pytest.raises(ConfigError):
            evaluate(self._records(tmp_path, rng), StubScorer(), condition=EvalCondition.from_snr(5.0))
