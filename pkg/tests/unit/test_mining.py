# tests/unit/test_mining.py
import numpy as np
import pytest

from app.models.audio import AudioClip
from app.models.evaluation import StreamConfig
from app.models.training import ManifestRecord
from app.repositories.wav_repository import write_wav
from app.services.mining_service import mine_hard_negatives, select_hard_windows
from tests.conftest import ConstantScorer


class TestSelectHardWindows:
    """Test suite for picking high-scoring windows"""

    def test_highest_first(self):
        """Test windows at or above tau come back by descending score"""
        assert select_hard_windows([0.1, 0.95, 0.2, 0.9], 0.8) == [1, 3]

    def test_tau_inclusive(self):
        """Test a score equal to tau qualifies"""
        assert select_hard_windows([0.5, 0.4], 0.5) == [0]

    def test_ties_keep_time_order(self):
        """Test equal scores keep the earlier window first"""
        assert select_hard_windows([0.9, 0.7, 0.9, 0.9], 0.8) == [0, 2, 3]

    def test_cap(self):
        """Test at most cap windows are kept"""
        assert select_hard_windows([0.81, 0.99, 0.9, 0.85], 0.8, cap=2) == [1, 2]

    def test_none_above(self):
        """Test no windows above tau"""
        assert select_hard_windows([0.1, 0.2], 0.8) == []


class TestMineHardNegatives:
    """Test suite for hard negative mining over a corpus"""

    def _corpus(self, tmp_path, rng):
        path = str(tmp_path / "bg.wav")
        write_wav(path, AudioClip(rng.normal(0, 0.05, 40000)))
        return [ManifestRecord(path=path, label="negative", split="train")]

    def test_additions_are_negative_windows(self, tmp_path, rng):
        """Test every qualifying window becomes a negative record with its offset"""
        result = mine_hard_negatives(ConstantScorer(0.9), self._corpus(tmp_path, rng), tau=0.8, cfg=StreamConfig())

        assert len(result.additions) == 11
        assert result.skipped_count == 0
        first = result.additions[0]
        assert first.label == "negative"
        assert first.offset_s == pytest.approx(0.0)
        assert first.score == pytest.approx(0.9)
        assert first.extra == {'mined': True}
        assert result.additions[-1].offset_s == pytest.approx(1.0)

    def test_cap_per_file(self, tmp_path, rng):
        """Test the per-file cap"""
        result = mine_hard_negatives(ConstantScorer(0.9), self._corpus(tmp_path, rng), tau=0.8, cap=3)
        assert len(result.additions) == 3

    def test_below_tau(self, tmp_path, rng):
        """Test a confident-negative model mines nothing"""
        result = mine_hard_negatives(ConstantScorer(0.1), self._corpus(tmp_path, rng), tau=0.8)
        assert result.additions == []

    def test_unreadable_file_skipped(self, tmp_path, rng):
        """Test missing and malformed files are counted and skipped"""
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"not a wav file")
        records = self._corpus(tmp_path, rng) + [
            ManifestRecord(path=str(bad), label="negative"),
            ManifestRecord(path=str(tmp_path / "missing.wav"), label="negative"),
        ]
        result = mine_hard_negatives(ConstantScorer(0.9), records, tau=0.8, cap=1, workers=2)
        assert len(result.additions) == 1
        assert result.skipped == [str(bad), str(tmp_path / "missing.wav")]

    def test_offsets_roundtrip_to_windows(self, tmp_path, rng):
        """Test mined offsets select the window that was scored"""
        records = self._corpus(tmp_path, rng)
        result = mine_hard_negatives(ConstantScorer(0.9), records, tau=0.8)
        offsets = np.array([r.offset_s for r in result.additions])
        np.testing.assert_allclose(np.sort(offsets), np.arange(11) * 0.1, atol=1e-6)
