"""
CRNN configuration, weights and checkpoint models
"""
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Tuple

import numpy as np

from app.core.errors import ConfigError, CorruptionError
from app.models.audio import FeatureConfig
from app.models.enums import Activation, CellKind, Constants
from app.utils.validators import first_error, validate_count

DIRECTIONS = ("fw", "bw")


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class ModelConfig:
    """
    Architecture of the CRNN

    Defaults are the 229k-parameter configuration: 32 filters of 20x5 with
    stride 8x2, two bidirectional GRU layers of 32 units, 64 FC units.
    """

    n_conv_filters: int = 32
    kernel_time: int = 20
    kernel_freq: int = 5
    stride_time: int = 8
    stride_freq: int = 2
    n_rec_layers: int = 2
    rec_hidden: int = 32
    cell_kind: CellKind = CellKind.GRU
    fc_units: int = 64
    rec_activation: Activation = Activation.RELU
    input_mels: int = Constants.N_MELS
    input_frames: int = Constants.INPUT_FRAMES

    def __post_init__(self):
        # Accept plain strings from JSON
        if not isinstance(self.cell_kind, CellKind):
            try:
                object.__setattr__(self, 'cell_kind', CellKind.from_string(str(self.cell_kind)))
            except ValueError:
                raise ConfigError(f"cell_kind must be GRU or LSTM, got {self.cell_kind!r}")
        if not isinstance(self.rec_activation, Activation):
            try:
                object.__setattr__(self, 'rec_activation', Activation(str(self.rec_activation).lower()))
            except ValueError:
                raise ConfigError(f"rec_activation must be relu or tanh, got {self.rec_activation!r}")

        error = first_error(*(
            validate_count(name, getattr(self, name))
            for name in (
                'n_conv_filters', 'kernel_time', 'kernel_freq', 'stride_time',
                'stride_freq', 'n_rec_layers', 'rec_hidden', 'fc_units',
                'input_mels', 'input_frames',
            )
        ))
        if error:
            raise ConfigError(error)

    # ==================== DERIVED GEOMETRY ====================

    @property
    def gates(self) -> int:
        return self.cell_kind.gates

    @property
    def time_out(self) -> int:
        return ceil_div(self.input_frames, self.stride_time)

    @property
    def freq_out(self) -> int:
        return ceil_div(self.input_mels, self.stride_freq)

    def layer_input_dim(self, layer: int) -> int:
        """Input width of recurrent layer ``layer`` (1-based)"""
        if layer == 1:
            return self.n_conv_filters * self.freq_out
        return 2 * self.rec_hidden

    @property
    def fc_input_dim(self) -> int:
        return self.time_out * 2 * self.rec_hidden

    def tensor_shapes(self) -> "OrderedDict[str, Tuple[int, ...]]":
        """Checkpoint-ordered tensor names and shapes"""
        shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
        shapes['conv.w'] = (self.n_conv_filters, self.kernel_time, self.kernel_freq)
        shapes['conv.b'] = (self.n_conv_filters,)

        gh = self.gates * self.rec_hidden
        for layer in range(1, self.n_rec_layers + 1):
            d_in = self.layer_input_dim(layer)
            for direction in DIRECTIONS:
                prefix = f"rnn{layer}.{direction}"
                shapes[f"{prefix}.W"] = (gh, d_in)
                shapes[f"{prefix}.U"] = (gh, self.rec_hidden)
                shapes[f"{prefix}.b"] = (gh,)

        shapes['fc.w'] = (self.fc_units, self.fc_input_dim)
        shapes['fc.b'] = (self.fc_units,)
        shapes['out.w'] = (2, self.fc_units)
        shapes['out.b'] = (2,)
        return shapes

    def with_input(self, input_mels: int, input_frames: int) -> 'ModelConfig':
        return replace(self, input_mels=input_mels, input_frames=input_frames)

    def to_dict(self) -> dict:
        return {
            'n_conv_filters': self.n_conv_filters,
            'kernel_time': self.kernel_time,
            'kernel_freq': self.kernel_freq,
            'stride_time': self.stride_time,
            'stride_freq': self.stride_freq,
            'n_rec_layers': self.n_rec_layers,
            'rec_hidden': self.rec_hidden,
            'cell_kind': self.cell_kind.value,
            'fc_units': self.fc_units,
            'rec_activation': self.rec_activation.value,
            'input_mels': self.input_mels,
            'input_frames': self.input_frames,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'ModelConfig':
        return cls(**data)


class Weights:
    """
    Named tensors of a CRNN in checkpoint order

    Names: conv.w, conv.b, rnn{l}.{fw|bw}.{W|U|b}, fc.w, fc.b, out.w, out.b.
    The same container is used for gradients.
    """

    def __init__(self, tensors: "OrderedDict[str, np.ndarray]"):
        self.tensors = OrderedDict(tensors)

    # ==================== CONSTRUCTION ====================

    @classmethod
    def zeros(cls, cfg: ModelConfig, dtype=np.float32) -> 'Weights':
        return cls(OrderedDict(
            (name, np.zeros(shape, dtype=dtype))
            for name, shape in cfg.tensor_shapes().items()
        ))

    def zeros_like(self) -> 'Weights':
        return Weights(OrderedDict(
            (name, np.zeros_like(value)) for name, value in self.tensors.items()
        ))

    def copy(self) -> 'Weights':
        return Weights(OrderedDict(
            (name, value.copy()) for name, value in self.tensors.items()
        ))

    def astype(self, dtype) -> 'Weights':
        return Weights(OrderedDict(
            (name, value.astype(dtype)) for name, value in self.tensors.items()
        ))

    # ==================== ACCESS ====================

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray):
        self.tensors[name] = value

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def names(self) -> List[str]:
        return list(self.tensors)

    def layer(self, layer: int, direction: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        prefix = f"rnn{layer}.{direction}"
        return self.tensors[f"{prefix}.W"], self.tensors[f"{prefix}.U"], self.tensors[f"{prefix}.b"]

    @property
    def size(self) -> int:
        """Total number of scalar elements"""
        return int(sum(value.size for value in self.tensors.values()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(value)) for value in self.tensors.values())

    def check_shapes(self, cfg: ModelConfig):
        """Raise CorruptionError when names or shapes differ from ``cfg``"""
        expected = cfg.tensor_shapes()
        if list(expected) != list(self.tensors):
            raise CorruptionError(
                "tensor names do not match model config",
                payload={'expected': list(expected), 'found': list(self.tensors)}
            )
        for name, shape in expected.items():
            if tuple(self.tensors[name].shape) != tuple(shape):
                raise CorruptionError(
                    f"tensor {name} has shape {self.tensors[name].shape}, expected {shape}"
                )


@dataclass
class Checkpoint:
    """Model config, feature config, float32 weights and string metadata"""

    config: ModelConfig
    weights: Weights
    feature_cfg: FeatureConfig = field(default_factory=FeatureConfig)
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.weights.check_shapes(self.config)
        self.metadata = {str(k): str(v) for k, v in self.metadata.items()}
