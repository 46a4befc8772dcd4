"""
Schemas for the engine configuration file
"""
from marshmallow import RAISE, Schema, ValidationError, fields, post_load, validate, validates

from app.core.errors import ConfigError
from app.models.alignment import AlignConfig
from app.models.audio import FeatureConfig, PcenConfig
from app.models.augmentation import AugmentSpec
from app.models.enums import Activation, CellKind, Constants
from app.models.evaluation import StreamConfig
from app.models.network import ModelConfig
from app.models.training import TrainConfig

_POSITIVE = validate.Range(min=0.0, min_inclusive=False)
_NONNEGATIVE = validate.Range(min=0.0)
_COUNT = validate.Range(min=1)


class _Section(Schema):
    """Rejects unknown keys and turns dataclass validation failures into field errors"""

    class Meta:
        unknown = RAISE

    target = None

    @post_load
    def make_config(self, data, **kwargs):
        try:
            return self.target(**data)
        except ConfigError as e:
            raise ValidationError(e.message)


class PcenSchema(_Section):
    target = PcenConfig

    smoother_coeff = fields.Float(load_default=0.025, validate=_POSITIVE)
    gain_exponent = fields.Float(load_default=0.98, validate=_POSITIVE)
    bias = fields.Float(load_default=2.0, validate=_NONNEGATIVE)
    root = fields.Float(load_default=0.5, validate=_POSITIVE)
    floor = fields.Float(load_default=1e-6, validate=_POSITIVE)


class FeatureSchema(_Section):
    target = FeatureConfig

    sample_rate = fields.Integer(load_default=Constants.SAMPLE_RATE, validate=_COUNT)
    window_ms = fields.Float(load_default=Constants.WINDOW_MS, validate=_POSITIVE)
    hop_ms = fields.Float(load_default=Constants.HOP_MS, validate=_POSITIVE)
    fft_size = fields.Integer(load_default=Constants.FFT_SIZE, validate=_COUNT)
    n_mels = fields.Integer(load_default=Constants.N_MELS, validate=_COUNT)
    fmin = fields.Float(load_default=Constants.FMIN, validate=_NONNEGATIVE)
    fmax = fields.Float(load_default=Constants.FMAX, validate=_POSITIVE)
    pcen = fields.Nested(PcenSchema, load_default=PcenConfig)


class ModelSchema(_Section):
    target = ModelConfig

    n_conv_filters = fields.Integer(load_default=32, validate=_COUNT)
    kernel_time = fields.Integer(load_default=20, validate=_COUNT)
    kernel_freq = fields.Integer(load_default=5, validate=_COUNT)
    stride_time = fields.Integer(load_default=8, validate=_COUNT)
    stride_freq = fields.Integer(load_default=2, validate=_COUNT)
    n_rec_layers = fields.Integer(load_default=2, validate=_COUNT)
    rec_hidden = fields.Integer(load_default=32, validate=_COUNT)
    cell_kind = fields.String(load_default=CellKind.GRU.value)
    fc_units = fields.Integer(load_default=64, validate=_COUNT)
    rec_activation = fields.String(
        load_default=Activation.RELU.value,
        validate=validate.OneOf([a.value for a in Activation])
    )

    @validates('cell_kind')
    def validate_cell_kind(self, value, **kwargs):
        try:
            CellKind.from_string(value)
        except ValueError:
            raise ValidationError("must be GRU or LSTM")


class TrainSchema(_Section):
    target = TrainConfig

    batch_size = fields.Integer(load_default=64, validate=_COUNT)
    lr_initial = fields.Float(load_default=0.001, validate=_POSITIVE)
    lr_final = fields.Float(load_default=0.0003, validate=_POSITIVE)
    lr_drop_patience = fields.Integer(load_default=3, validate=_COUNT)
    adam_beta1 = fields.Float(load_default=0.9, validate=validate.Range(min=0.0, max=1.0, max_inclusive=False))
    adam_beta2 = fields.Float(load_default=0.999, validate=validate.Range(min=0.0, max=1.0, max_inclusive=False))
    adam_eps = fields.Float(load_default=1e-8, validate=_POSITIVE)
    max_epochs = fields.Integer(load_default=30, validate=_COUNT)
    max_steps = fields.Integer(load_default=None, allow_none=True, validate=_COUNT)
    seed = fields.Integer(load_default=0, validate=validate.Range(min=0))
    data_fraction = fields.Float(
        load_default=1.0,
        validate=validate.Range(min=0.0, max=1.0, min_inclusive=False),
        metadata={"description": "Share of each class of training records to keep"}
    )


class AugmentSchema(_Section):
    target = AugmentSpec

    snr_db_range = fields.List(
        fields.Float(allow_nan=False),
        load_default=lambda: [-5.0, 15.0],
        validate=validate.Length(equal=2),
        metadata={"description": "[low, high] dB, drawn uniformly"}
    )
    jitter_max_ms = fields.Float(load_default=100.0, validate=_NONNEGATIVE)
    rir_paths = fields.List(fields.String(), load_default=list)
    rng_seed = fields.Integer(load_default=0, validate=validate.Range(min=0))

    @post_load
    def make_config(self, data, **kwargs):
        data['snr_db_range'] = tuple(data['snr_db_range'])
        data['rir_paths'] = tuple(data['rir_paths'])
        return super().make_config(data, **kwargs)


class StreamSchema(_Section):
    target = StreamConfig

    window_s = fields.Float(load_default=Constants.WINDOW_S, validate=_POSITIVE)
    hop_s = fields.Float(load_default=Constants.HOP_S, validate=_POSITIVE)
    threshold = fields.Float(load_default=0.5, validate=_NONNEGATIVE)
    refractory_s = fields.Float(load_default=1.0, validate=_NONNEGATIVE)
    tolerance_s = fields.Float(load_default=Constants.MATCH_TOLERANCE_S, validate=_NONNEGATIVE)


class AlignSchema(_Section):
    target = AlignConfig

    alpha = fields.Float(load_default=0.5, validate=validate.Range(min=0.0, max=1.0))
    n_iter = fields.Integer(load_default=2, validate=_COUNT)
    smooth_window = fields.Integer(load_default=7, validate=_COUNT)
    pad_s = fields.Float(load_default=0.1, validate=_NONNEGATIVE)


class PathsSchema(Schema):
    """Default artifact locations (command-line arguments take precedence)"""

    class Meta:
        unknown = RAISE

    manifest = fields.String(load_default=None, allow_none=True)
    checkpoint = fields.String(load_default=None, allow_none=True)
    metrics = fields.String(load_default=None, allow_none=True)
    out_dir = fields.String(load_default=None, allow_none=True)


class CliConfigSchema(Schema):
    """Top-level engine configuration; every section is optional"""

    class Meta:
        unknown = RAISE

    feature = fields.Nested(FeatureSchema, load_default=FeatureConfig)
    model = fields.Nested(ModelSchema, load_default=ModelConfig)
    train = fields.Nested(TrainSchema, load_default=TrainConfig)
    augment = fields.Nested(AugmentSchema, load_default=AugmentSpec)
    stream = fields.Nested(StreamSchema, load_default=StreamConfig)
    align = fields.Nested(AlignSchema, load_default=AlignConfig)
    paths = fields.Nested(PathsSchema, load_default=dict)
