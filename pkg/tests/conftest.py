"""
Shared fixtures
"""
import os

os.environ.setdefault('KWS_ENV', 'testing')

import numpy as np
import pytest

from app.models.audio import AudioClip, FeatureConfig
from app.models.evaluation import StreamConfig
from app.models.network import Checkpoint, ModelConfig
from app.services.network_service import init_weights


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def feature_cfg():
    return FeatureConfig()


@pytest.fixture
def tone_clip():
    """1.5 s, 1 kHz sine at amplitude 0.5"""
    t = np.arange(24000) / 16000.0
    return AudioClip(0.5 * np.sin(2 * np.pi * 1000.0 * t), 16000)


@pytest.fixture
def noise_clip(rng):
    return AudioClip(rng.normal(0.0, 0.1, 48000), 16000)


@pytest.fixture
def tiny_model_cfg():
    """Small CRNN on a 10 x 12 input"""
    return ModelConfig(
        n_conv_filters=2,
        kernel_time=3,
        kernel_freq=3,
        stride_time=2,
        stride_freq=2,
        n_rec_layers=1,
        rec_hidden=3,
        fc_units=4,
        input_mels=10,
        input_frames=12,
    )


@pytest.fixture
def small_checkpoint():
    """Randomly initialized checkpoint that accepts 1.5 s windows"""
    feature_cfg = FeatureConfig()
    frames = feature_cfg.frames_for(StreamConfig().window_samples(feature_cfg.sample_rate))
    cfg = ModelConfig(n_conv_filters=4, n_rec_layers=1, rec_hidden=8, fc_units=8).with_input(40, frames)
    return Checkpoint(cfg, init_weights(cfg, np.random.default_rng(0)), feature_cfg)


class StubScorer:
    """Scores a window by the mean of its features"""

    def __init__(self, feature_cfg=None):
        self.feature_cfg = feature_cfg or FeatureConfig()
        self.calls = 0

    def score_batch(self, windows):
        self.calls += 1
        return np.array([float(np.mean(np.asarray(getattr(w, 'values', w)))) for w in windows])


class ConstantScorer:
    """Always returns the same score"""

    def __init__(self, value, feature_cfg=None):
        self.value = value
        self.feature_cfg = feature_cfg or FeatureConfig()

    def score_batch(self, windows):
        return np.full(len(windows), self.value)


@pytest.fixture
def stub_scorer():
    return StubScorer()
