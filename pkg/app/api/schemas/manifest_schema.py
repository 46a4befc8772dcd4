"""
Schemas for JSONL manifest records
"""
from marshmallow import INCLUDE, Schema, ValidationError, fields, post_load, validate, validates_schema

from app.models.enums import ExampleLabel, ManifestKind, Split
from app.models.training import ManifestRecord

_SPAN = fields.List(fields.Float(allow_nan=False), validate=validate.Length(equal=2))


class ManifestRecordSchema(Schema):
    """One manifest line; unknown keys are kept in ``extra``"""

    class Meta:
        unknown = INCLUDE

    path = fields.String(required=True, validate=validate.Length(min=1))

    label = fields.String(
        load_default=None,
        allow_none=True,
        validate=validate.OneOf([e.value for e in ExampleLabel])
    )

    kind = fields.String(
        load_default=ManifestKind.EXAMPLE.value,
        validate=validate.OneOf([e.value for e in ManifestKind])
    )

    split = fields.String(
        load_default=Split.TRAIN.value,
        validate=validate.OneOf([e.value for e in Split])
    )

    span_s = fields.List(
        fields.Float(allow_nan=False),
        load_default=None,
        allow_none=True,
        validate=validate.Length(equal=2),
        metadata={"description": "Aligned keyword [begin, end] in seconds"}
    )

    spans_s = fields.List(
        _SPAN,
        load_default=None,
        allow_none=True,
        metadata={"description": "All keyword spans of an evaluation file"}
    )

    offset_s = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0.0))
    score = fields.Float(load_default=None, allow_none=True)

    @validates_schema
    def validate_spans(self, data, **kwargs):
        spans = list(data.get('spans_s') or [])
        if data.get('span_s') is not None:
            spans.append(data['span_s'])
        for begin, end in spans:
            if begin < 0 or begin > end:
                raise ValidationError(f"invalid span [{begin}, {end}]")

        if data.get('kind', ManifestKind.EXAMPLE.value) == ManifestKind.EXAMPLE.value and data.get('label') is None \
                and data.get('spans_s') is None:
            raise ValidationError("example records need a label or spans_s")

    @post_load
    def make_record(self, data, **kwargs):
        known = set(self.fields)
        extra = {key: value for key, value in data.items() if key not in known}
        return ManifestRecord(
            path=data['path'],
            label=data['label'],
            kind=data['kind'],
            split=data['split'],
            span_s=tuple(data['span_s']) if data['span_s'] is not None else None,
            spans_s=[tuple(s) for s in data['spans_s']] if data['spans_s'] is not None else None,
            offset_s=data['offset_s'],
            score=data['score'],
            extra=extra,
        )
