# tests/unit/test_augment.py
import numpy as np
import pytest
import scipy.stats

from app.core.errors import ConfigError, DegenerateNoiseError, DegenerateSignalError
from app.models.audio import AudioClip
from app.models.augmentation import AugmentSpec, ImpulseResponse
from app.models.training import TrainingWindow
from app.repositories.feature_cache_repository import FeatureCacheRepository
from app.services.augment_service import (
    apply_rir,
    augment_windows,
    build_feature_cache,
    draw_snr_db,
    example_rng,
    jittered_label,
    make_training_example,
    mix_at_snr,
    random_jitter,
    realized_snr_db,
    shift_clip,
    snr_gain,
)
from app.services.frontend_service import featurize


class TestNoiseMixing:
    """Test suite for additive noise at a target SNR"""

    @pytest.mark.parametrize("snr_db", [-5.0, 0.0, 7.5, 15.0])
    def test_realized_snr(self, rng, snr_db):
        """Test the mixture hits the requested SNR within 0.05 dB"""
        signal = AudioClip(rng.normal(0, 0.01, 24000))
        noise = AudioClip(rng.normal(0, 0.02, 48000))
        mixed = mix_at_snr(signal, noise, snr_db, rng)
        added = mixed.samples - signal.samples
        assert realized_snr_db(signal.samples, added) == pytest.approx(snr_db, abs=0.05)

    def test_ratio_kept_when_clipping(self, rng):
        """Test peak rescaling preserves the SNR"""
        signal = AudioClip(rng.uniform(-0.9, 0.9, 16000))
        noise = AudioClip(rng.normal(0, 1.0, 16000))
        mixed = mix_at_snr(signal, noise, -5.0)
        assert np.max(np.abs(mixed.samples)) <= 1.0 + 1e-12

        basis = np.stack([signal.samples, noise.samples], axis=1)
        (a, b), *_ = np.linalg.lstsq(basis, mixed.samples, rcond=None)
        assert a < 1.0
        assert realized_snr_db(a * signal.samples, b * noise.samples) == pytest.approx(-5.0, abs=0.05)

    def test_short_noise_tiled(self, rng):
        """Test noise shorter than the signal is repeated"""
        signal = AudioClip(rng.normal(0, 0.01, 16000))
        noise = AudioClip(rng.normal(0, 0.01, 1000))
        assert len(mix_at_snr(signal, noise, 10.0)) == 16000

    def test_silent_signal(self, noise_clip):
        """Test zero-power signal is rejected"""
        with pytest.raises(DegenerateSignalError):
            mix_at_snr(AudioClip(np.zeros(1000)), noise_clip, 5.0)

    def test_silent_noise(self, tone_clip):
        """Test zero-power noise is rejected"""
        with pytest.raises(DegenerateNoiseError):
            mix_at_snr(tone_clip, AudioClip(np.zeros(24000)), 5.0)

    def test_rate_mismatch(self, tone_clip):
        """Test noise at another sample rate is rejected"""
        with pytest.raises(ConfigError):
            mix_at_snr(tone_clip, AudioClip(np.ones(8000), 8000), 5.0)

    def test_gain_formula(self):
        """Test gain for equal powers"""
        assert snr_gain(1.0, 1.0, 0.0) == pytest.approx(1.0)
        assert snr_gain(4.0, 1.0, 0.0) == pytest.approx(2.0)

    def test_snr_distribution(self):
        """Test SNR draws are uniform over [-5, 15] with mean near 5 dB"""
        spec = AugmentSpec()
        draws = np.array([draw_snr_db(spec, example_rng(0, 0, i)) for i in range(5000)])
        assert draws.min() >= -5.0 and draws.max() <= 15.0
        assert draws.mean() == pytest.approx(5.0, abs=0.3)

    def test_snr_accuracy_over_many_mixes(self):
        """Test 1000 mixes at drawn SNRs each land within 0.01 dB of the target"""
        spec = AugmentSpec()
        errors = []
        for i in range(1000):
            rng = example_rng(3, 0, i)
            signal = AudioClip(rng.normal(0, 0.01, 4000))
            noise = AudioClip(rng.normal(0, 0.02, 6000))
            snr_db = draw_snr_db(spec, rng)
            mixed = mix_at_snr(signal, noise, snr_db, rng)
            errors.append(realized_snr_db(signal.samples, mixed.samples - signal.samples) - snr_db)
        assert np.max(np.abs(errors)) < 0.01


class TestJitter:
    """Test suite for timing jitter"""

    def test_shift_later(self):
        """Test a positive shift moves content later with zero fill"""
        clip = AudioClip(np.arange(1, 17, dtype=float), 16000)
        out = shift_clip(clip, 0.25).samples
        np.testing.assert_array_equal(out[:4], 0.0)
        np.testing.assert_array_equal(out[4:], np.arange(1, 13))

    def test_shift_earlier(self):
        """Test a negative shift moves content earlier"""
        clip = AudioClip(np.arange(1, 17, dtype=float), 16000)
        out = shift_clip(clip, -0.125).samples
        np.testing.assert_array_equal(out[:14], np.arange(3, 17))
        np.testing.assert_array_equal(out[14:], 0.0)

    def test_jitter_bounded_and_quantized(self, tone_clip):
        """Test applied shifts stay within the bound and land on whole samples"""
        for i in range(50):
            out, shift_ms = random_jitter(tone_clip, 100.0, example_rng(1, 0, i))
            assert abs(shift_ms) <= 100.0
            assert (shift_ms * 16) == pytest.approx(round(shift_ms * 16), abs=1e-9)
            assert len(out) == len(tone_clip)

    def test_zero_jitter(self, tone_clip, rng):
        """Test zero maximum leaves the clip unchanged"""
        out, shift_ms = random_jitter(tone_clip, 0.0, rng)
        assert shift_ms == 0.0
        np.testing.assert_array_equal(out.samples, tone_clip.samples)

    def test_jitter_uniform(self, tone_clip):
        """Test applied shifts spread evenly over ten bins of [-100, 100] ms"""
        shifts = [random_jitter(tone_clip, 100.0, example_rng(2, 0, i))[1] for i in range(2000)]
        counts, _ = np.histogram(shifts, bins=10, range=(-100.0, 100.0))
        assert scipy.stats.chisquare(counts).pvalue > 0.001

    def test_label_follows_span(self):
        """Test positives shifted partly out of the window become negatives"""
        assert jittered_label(1, (0.5, 0.9), 50.0, 1.5) == 1
        assert jittered_label(1, (1.2, 1.45), 100.0, 1.5) == 0
        assert jittered_label(1, (0.05, 0.4), -100.0, 1.5) == 0
        assert jittered_label(0, (0.5, 0.9), 0.0, 1.5) == 0


class TestImpulseResponse:
    """Test suite for far-field convolution"""

    def test_delta_is_identity(self, tone_clip):
        """Test a unit impulse returns the clip sample-exactly"""
        out = apply_rir(tone_clip, ImpulseResponse(np.array([1.0, 0.0, 0.0]), 16000))
        np.testing.assert_array_equal(out.samples, tone_clip.samples)

    def test_delayed_delta(self, tone_clip):
        """Test a delayed impulse shifts and truncates"""
        taps = np.zeros(10)
        taps[4] = 1.0
        out = apply_rir(tone_clip, ImpulseResponse(taps, 16000))
        assert len(out) == len(tone_clip)
        np.testing.assert_allclose(out.samples[4:], tone_clip.samples[:-4], atol=1e-12)

    def test_long_response_uses_fft(self, tone_clip, rng):
        """Test long responses give the same result as direct convolution"""
        taps = rng.normal(0, 0.01, 2000) * np.exp(-np.arange(2000) / 300.0)
        out = apply_rir(tone_clip, ImpulseResponse(taps, 16000))
        expected = np.convolve(tone_clip.samples, taps)[:len(tone_clip)]
        peak = np.max(np.abs(expected))
        expected = expected / peak if peak > 1.0 else expected
        np.testing.assert_allclose(out.samples, expected, atol=1e-9)

    def test_rate_mismatch(self, tone_clip):
        """Test responses at another sample rate are rejected"""
        with pytest.raises(ConfigError):
            apply_rir(tone_clip, ImpulseResponse(np.ones(4), 8000))


class TestTrainingExamples:
    """Test suite for the augmentation pipeline"""

    def test_example_fields(self, tone_clip, noise_clip, feature_cfg):
        """Test the augmented example records its draws"""
        spec = AugmentSpec(snr_db_range=(0.0, 10.0), jitter_max_ms=50.0)
        ex = make_training_example(tone_clip, 1, spec, [noise_clip], example_rng(0, 1, 0), feature_cfg,
                                   span_s=(0.5, 1.0))
        assert ex.features.shape == (40, 151)
        assert 0.0 <= ex.snr_db <= 10.0
        assert abs(ex.shift_ms) <= 50.0
        assert ex.label == 1

    def test_empty_pool(self, tone_clip, feature_cfg, rng):
        """Test augmentation needs noise"""
        with pytest.raises(ConfigError):
            make_training_example(tone_clip, 1, AugmentSpec(), [], rng, feature_cfg)

    def test_silent_noise_keeps_clean_window(self, tone_clip, feature_cfg, caplog):
        """Test a zero-energy noise clip falls back to the clean window with a warning"""
        spec = AugmentSpec(jitter_max_ms=0.0)
        with caplog.at_level("WARNING", logger="app.services.augment_service"):
            ex = make_training_example(tone_clip, 1, spec, [AudioClip(np.zeros(24000))],
                                       example_rng(0, 0, 0), feature_cfg, source="kw.wav")
        assert ex.snr_db is None
        assert ex.label == 1
        np.testing.assert_allclose(ex.features.values, featurize(tone_clip, feature_cfg).values)
        assert "Noise mixing skipped" in caplog.text

    def test_silent_window_does_not_abort_batch(self, tone_clip, noise_clip, feature_cfg):
        """Test a silent window in a batch is kept clean while the rest get noise"""
        windows = [TrainingWindow(AudioClip(np.zeros(24000)), 0), TrainingWindow(tone_clip, 0)]
        examples = augment_windows(windows, AugmentSpec(), [noise_clip], feature_cfg)
        assert examples[0].snr_db is None
        assert examples[1].snr_db is not None

    def test_independent_of_workers(self, tone_clip, noise_clip, feature_cfg):
        """Test per-example seeding makes results independent of the pool size"""
        windows = [TrainingWindow(tone_clip, 1, (0.5, 1.0)), TrainingWindow(tone_clip, 0)] * 3
        spec = AugmentSpec(rng_seed=9)
        a = augment_windows(windows, spec, [noise_clip], feature_cfg, epoch=2, workers=1)
        b = augment_windows(windows, spec, [noise_clip], feature_cfg, epoch=2, workers=3)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.features.values, y.features.values)
            assert x.snr_db == y.snr_db

    def test_epochs_differ(self, tone_clip, noise_clip, feature_cfg):
        """Test each epoch draws fresh augmentations"""
        windows = [TrainingWindow(tone_clip, 0)]
        a = augment_windows(windows, AugmentSpec(), [noise_clip], feature_cfg, epoch=1)
        b = augment_windows(windows, AugmentSpec(), [noise_clip], feature_cfg, epoch=2)
        assert a[0].snr_db != b[0].snr_db

    def test_no_pool_gives_clean_windows(self, tone_clip, feature_cfg):
        """Test windows are featurized unchanged without noise"""
        examples = augment_windows([TrainingWindow(tone_clip, 1)], AugmentSpec(), [], feature_cfg)
        assert examples[0].snr_db is None
        assert examples[0].label == 1

    def test_feature_cache(self, tone_clip, noise_clip, feature_cfg, tmp_path):
        """Test the msgpack cache stores examples and settings"""
        path = str(tmp_path / "cache.msgpack")
        windows = [TrainingWindow(tone_clip, 1, (0.5, 1.0), source="kw.wav"), TrainingWindow(tone_clip, 0)]
        written = build_feature_cache(path, windows, AugmentSpec(rng_seed=4), [noise_clip], feature_cfg, epoch=3)

        examples, meta = FeatureCacheRepository(path).load()
        assert meta['epoch'] == 3
        assert meta['rng_seed'] == 4
        assert [e.label for e in examples] == [e.label for e in written]
        assert examples[0].source == "kw.wav"
        np.testing.assert_allclose(examples[0].features.values, written[0].features.values)
