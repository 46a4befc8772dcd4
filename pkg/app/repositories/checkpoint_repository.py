"""
Checkpoint Repository - CKWS model files

Layout (little-endian):
    "CKWS", u32 version, u32 header length,
    UTF-8 JSON header {model, feature, tensors: [{name, shape, offset, nbytes}], metadata},
    float32 row-major tensor payloads in manifest order.

Offsets in the manifest are relative to the first payload byte.
"""
import logging
import struct
from collections import OrderedDict

import orjson

from app.core.errors import ConfigError, CorruptionError, FormatError
from app.models.audio import FeatureConfig
from app.models.enums import Constants
from app.models.network import Checkpoint, ModelConfig, Weights
from app.repositories.binary_format import (
    PREAMBLE,
    check_preamble,
    f32_bytes,
    read_bytes,
    read_f32_block,
    unpack_header,
    write_bytes,
)

logger = logging.getLogger(__name__)

_HEADER_LEN = struct.Struct('<I')


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    manifest = []
    payloads = []
    offset = 0
    for name, value in ckpt.weights.items():
        blob = f32_bytes(value)
        manifest.append({
            'name': name,
            'shape': list(value.shape),
            'offset': offset,
            'nbytes': len(blob),
        })
        payloads.append(blob)
        offset += len(blob)

    header = orjson.dumps({
        'model': ckpt.config.to_dict(),
        'feature': ckpt.feature_cfg.to_dict(),
        'tensors': manifest,
        'metadata': ckpt.metadata,
    })

    return (
        PREAMBLE.pack(Constants.CKWS_MAGIC, Constants.FORMAT_VERSION)
        + _HEADER_LEN.pack(len(header))
        + header
        + b"".join(payloads)
    )


def decode_checkpoint(data: bytes, path: str = "<bytes>") -> Checkpoint:
    offset = check_preamble(data, Constants.CKWS_MAGIC, path)
    (header_len,), offset = unpack_header(_HEADER_LEN, data, offset, path)

    if len(data) < offset + header_len:
        raise CorruptionError(f"{path}: header truncated")

    try:
        header = orjson.loads(data[offset:offset + header_len])
        model_cfg = ModelConfig.from_dict(header['model'])
        feature_cfg = FeatureConfig.from_dict(header['feature'])
        manifest = header['tensors']
        metadata = header.get('metadata', {})
    except (orjson.JSONDecodeError, KeyError, TypeError) as e:
        raise FormatError(f"{path}: malformed checkpoint header ({e})")
    except ConfigError as e:
        raise CorruptionError(f"{path}: invalid configuration in header ({e.message})")

    payload_start = offset + header_len
    expected = model_cfg.tensor_shapes()

    if [entry.get('name') for entry in manifest] != list(expected):
        raise CorruptionError(
            f"{path}: tensor manifest does not match model configuration",
            payload={'path': path}
        )

    tensors = OrderedDict()
    cursor = payload_start
    for entry in manifest:
        name = entry['name']
        shape = tuple(entry['shape'])
        if shape != expected[name]:
            raise CorruptionError(f"{path}: tensor {name} has shape {shape}, expected {expected[name]}")
        if payload_start + entry['offset'] != cursor:
            raise CorruptionError(f"{path}: tensor {name} is not contiguous in the payload")
        tensors[name], cursor = read_f32_block(data, cursor, shape, path)

    if cursor != len(data):
        raise CorruptionError(f"{path}: {len(data) - cursor} trailing bytes after payload")

    return Checkpoint(
        config=model_cfg,
        weights=Weights(tensors),
        feature_cfg=feature_cfg,
        metadata=metadata,
    )


def save_checkpoint(ckpt: Checkpoint, path: str):
    """Write ``ckpt`` with float32 tensors"""
    write_bytes(path, encode_checkpoint(ckpt))
    logger.info(
        "Saved checkpoint",
        extra={'path': path, 'tensors': len(ckpt.weights.names()), 'params': ckpt.weights.size}
    )


def load_checkpoint(path: str) -> Checkpoint:
    ckpt = decode_checkpoint(read_bytes(path), path)
    logger.debug("Loaded checkpoint", extra={'path': path, 'params': ckpt.weights.size})
    return ckpt


__all__ = ['encode_checkpoint', 'decode_checkpoint', 'save_checkpoint', 'load_checkpoint']
