"""
Enums and Constants
"""
from enum import Enum


class CellKind(str, Enum):
    """
    Recurrent unit used by the bidirectional layers

    Gate stacking order inside the weight matrices is frozen:
        GRU: z, r, h~ (3 gates)
        LSTM: i, f, g, o (4 gates)
    """
    GRU = "GRU"
    LSTM = "LSTM"

    @property
    def gates(self) -> int:
        """Number of stacked gate blocks"""
        return 3 if self is CellKind.GRU else 4

    @classmethod
    def from_string(cls, value: str) -> 'CellKind':
        """
        Parse cell kind case-insensitively

        Examples:
            >>> CellKind.from_string('gru')
            <CellKind.GRU: 'GRU'>
        """
        return cls(value.upper())


class Activation(str, Enum):
    """Candidate activation of the recurrent cells"""
    RELU = "relu"
    TANH = "tanh"


class ExampleLabel(str, Enum):
    """Manifest label of a training record"""
    POSITIVE = "positive"
    NEGATIVE = "negative"

    def to_target(self) -> int:
        """Binary class index (1 = keyword)"""
        return 1 if self is ExampleLabel.POSITIVE else 0


class ManifestKind(str, Enum):
    """
    Role of a manifest record

    EXAMPLE records are training/eval audio, NOISE and RIR records feed
    the augmentation pools.
    """
    EXAMPLE = "example"
    NOISE = "noise"
    RIR = "rir"


class Split(str, Enum):
    """Dataset split of an example record"""
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


# ==================== CONSTANTS ====================

class Constants:
    """Engine-wide constants"""

    # Audio
    SAMPLE_RATE = 16000
    WINDOW_S = 1.5
    HOP_S = 0.1

    # Frontend
    N_MELS = 40
    HOP_MS = 10.0
    WINDOW_MS = 25.0
    FFT_SIZE = 512
    FMIN = 20.0
    FMAX = 8000.0

    # Network input geometry for a 1.5 s window
    INPUT_FRAMES = 151

    # Numerics
    PROB_CLAMP = 1e-12

    # Binary formats
    FORMAT_VERSION = 1
    FMAT_MAGIC = b"FMAT"
    CKWS_MAGIC = b"CKWS"
    CPST_MAGIC = b"CPST"

    # Evaluation
    MATCH_TOLERANCE_S = 0.75
    REPORT_TARGETS_FA = (1.0, 0.5)


__all__ = [
    'CellKind',
    'Activation',
    'ExampleLabel',
    'ManifestKind',
    'Split',
    'Constants',
]
