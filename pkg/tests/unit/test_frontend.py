# tests/unit/test_frontend.py
import numpy as np
import pytest

from app.core.errors import ConfigError, DomainError, EmptyInputError
from app.models.audio import AudioClip, FeatureConfig, PcenConfig
from app.services.frontend_service import (
    featurize,
    log_mel,
    mel_center_frequencies,
    mel_energies,
    pcen,
)


class TestMelEnergies:
    """Test suite for the mel filterbank stage"""

    def test_frame_count_for_window(self, tone_clip, feature_cfg):
        """Test 1.5 s at 16 kHz gives 151 frames of 40 bands"""
        energies = mel_energies(tone_clip, feature_cfg)
        assert energies.shape == (40, 151)

    def test_three_seconds_gives_301_frames(self, feature_cfg):
        """Test 3.0 s at 16 kHz gives 301 centered frames"""
        assert mel_energies(AudioClip(np.zeros(48000)), feature_cfg).shape == (40, 301)

    def test_energies_nonnegative(self, noise_clip, feature_cfg):
        """Test energies are never negative"""
        assert np.all(mel_energies(noise_clip, feature_cfg) >= 0)

    def test_tone_peaks_near_its_frequency(self, tone_clip, feature_cfg):
        """Test a 1 kHz tone peaks in the band centered closest to 1 kHz"""
        energies = mel_energies(tone_clip, feature_cfg)
        centers = mel_center_frequencies(feature_cfg)
        peak_band = int(np.argmax(energies[:, 75]))
        assert abs(peak_band - int(np.argmin(np.abs(centers - 1000.0)))) <= 1

    def test_rate_mismatch(self, feature_cfg):
        """Test clips at another sample rate are rejected"""
        with pytest.raises(ConfigError):
            mel_energies(AudioClip(np.zeros(8000), 8000), feature_cfg)

    def test_clip_shorter_than_hop(self, feature_cfg):
        """Test clips shorter than one hop are rejected"""
        with pytest.raises(EmptyInputError):
            mel_energies(AudioClip(np.zeros(100), 16000), feature_cfg)


class TestPcen:
    """Test suite for per-channel energy normalization"""

    def test_constant_input_value(self):
        """Test PCEN of unit energy with an instant smoother"""
        values = pcen(np.ones((40, 5)), PcenConfig(smoother_coeff=1.0)).values
        expected = (1.0 / (1e-6 + 1.0) ** 0.98 + 2.0) ** 0.5 - 2.0 ** 0.5
        np.testing.assert_allclose(values, expected, rtol=1e-9)

    def test_first_frame_smoother_starts_at_energy(self):
        """Test M(0) = E(0), so the first frame is independent of the smoother coefficient"""
        energies = np.full((3, 4), 7.0)
        fast = pcen(energies, PcenConfig(smoother_coeff=0.9)).values
        slow = pcen(energies, PcenConfig(smoother_coeff=0.025)).values
        np.testing.assert_allclose(fast[:, 0], slow[:, 0], rtol=1e-9)

    def test_matches_recursive_definition(self, rng):
        """Test against the explicit smoother recursion"""
        cfg = PcenConfig()
        energies = rng.uniform(0.0, 5.0, size=(4, 30))
        smooth = np.empty_like(energies)
        smooth[:, 0] = energies[:, 0]
        for t in range(1, energies.shape[1]):
            smooth[:, t] = (1 - cfg.smoother_coeff) * smooth[:, t - 1] + cfg.smoother_coeff * energies[:, t]
        expected = (energies / (cfg.floor + smooth) ** cfg.gain_exponent + cfg.bias) ** cfg.root \
            - cfg.bias ** cfg.root
        np.testing.assert_allclose(pcen(energies, cfg).values, expected, rtol=1e-6, atol=1e-9)

    def test_output_nonnegative(self, rng):
        """Test PCEN output is nonnegative"""
        values = pcen(rng.uniform(0.0, 1e4, size=(40, 100)), PcenConfig()).values
        assert np.all(values >= 0)

    def test_negative_energy_rejected(self):
        """Test negative energies raise DomainError"""
        with pytest.raises(DomainError):
            pcen(np.array([[1.0, -0.5]]), PcenConfig())

    def test_invalid_constants_rejected(self):
        """Test out-of-range PCEN constants"""
        with pytest.raises(ConfigError):
            PcenConfig(smoother_coeff=0.0)
        with pytest.raises(ConfigError):
            PcenConfig(root=1.5)


class TestFeaturize:
    """Test suite for the full feature pipeline"""

    def test_silence_gives_zero_features(self, feature_cfg):
        """Test silent input maps to all-zero PCEN features"""
        features = featurize(AudioClip(np.zeros(24000)), feature_cfg)
        assert features.shape == (40, 151)
        np.testing.assert_allclose(features.values, 0.0, atol=1e-9)

    def test_deterministic(self, noise_clip, feature_cfg):
        """Test featurization is a pure function"""
        a = featurize(noise_clip, feature_cfg).values
        b = featurize(noise_clip, feature_cfg).values
        np.testing.assert_array_equal(a, b)

    def test_gain_robustness(self, noise_clip, feature_cfg):
        """Test PCEN compresses a 20 dB level change far below the log-mel difference"""
        loud = AudioClip(noise_clip.samples * 10.0)
        pcen_delta = np.mean(np.abs(featurize(loud, feature_cfg).values - featurize(noise_clip, feature_cfg).values))
        log_delta = np.mean(np.abs(log_mel(loud, feature_cfg).values - log_mel(noise_clip, feature_cfg).values))
        assert pcen_delta < log_delta

    def test_sine_gain_invariance(self, feature_cfg):
        """Test a 20 dB louder sine changes the peak-band PCEN by at most 100^(1 - 0.98)"""
        t = np.arange(24000) / 16000.0
        tone = np.sin(2 * np.pi * 1000.0 * t)
        quiet, loud = AudioClip(0.05 * tone), AudioClip(0.5 * tone)

        band = int(np.argmin(np.abs(mel_center_frequencies(feature_cfg) - 1000.0)))
        np.testing.assert_allclose(
            mel_energies(loud, feature_cfg)[band], 100.0 * mel_energies(quiet, feature_cfg)[band], rtol=1e-5
        )

        quiet_pcen = featurize(quiet, feature_cfg).values[band]
        loud_pcen = featurize(loud, feature_cfg).values[band]
        assert np.all(quiet_pcen > 0)
        ratio = loud_pcen / quiet_pcen
        assert np.all(ratio >= 1.0)
        assert np.all(ratio <= 100.0 ** 0.02 * (1.0 + 1e-4))

    def test_log_mel_debug_features(self, tone_clip, feature_cfg):
        """Test log-mel features share the PCEN geometry"""
        assert log_mel(tone_clip, feature_cfg).shape == (40, 151)


class TestFeatureConfig:
    """Test suite for FeatureConfig validation"""

    def test_defaults(self):
        """Test default geometry"""
        cfg = FeatureConfig()
        assert cfg.hop_samples == 160
        assert cfg.win_samples == 400
        assert cfg.frames_for(24000) == 151

    def test_fmax_above_nyquist(self):
        """Test fmax above half the sample rate is rejected"""
        with pytest.raises(ConfigError):
            FeatureConfig(fmax=9000.0)

    def test_window_longer_than_fft(self):
        """Test an analysis window larger than the FFT is rejected"""
        with pytest.raises(ConfigError):
            FeatureConfig(window_ms=50.0, fft_size=512)

    def test_dict_roundtrip(self):
        """Test to_dict / from_dict"""
        cfg = FeatureConfig(n_mels=32, pcen=PcenConfig(bias=1.0))
        assert FeatureConfig.from_dict(cfg.to_dict()) == cfg
