"""
Feature Repository - FMAT feature matrix files

Layout: "FMAT", u32 version, u32 rows, u32 cols, rows*cols f32 row-major.
All integers and floats little-endian.
"""
import logging
import struct

import numpy as np

from app.core.errors import CorruptionError
from app.models.audio import FeatureMatrix
from app.models.enums import Constants
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

_DIMS = struct.Struct('<II')


def encode_fmat(features: FeatureMatrix) -> bytes:
    rows, cols = features.shape
    return (
        PREAMBLE.pack(Constants.FMAT_MAGIC, Constants.FORMAT_VERSION)
        + _DIMS.pack(rows, cols)
        + f32_bytes(features.values)
    )


def decode_fmat(data: bytes, path: str = "<bytes>") -> FeatureMatrix:
    offset = check_preamble(data, Constants.FMAT_MAGIC, path)
    (rows, cols), offset = unpack_header(_DIMS, data, offset, path)
    values, end = read_f32_block(data, offset, (rows, cols), path)
    if end != len(data):
        raise CorruptionError(f"{path}: {len(data) - end} trailing bytes after payload")
    return FeatureMatrix(values)


def save_fmat(path: str, features: FeatureMatrix):
    write_bytes(path, encode_fmat(features))
    logger.debug("Saved features", extra={'path': path, 'shape': features.shape})


def load_fmat(path: str) -> FeatureMatrix:
    """hop_ms and origin_time_s are not stored and default to 10 / 0"""
    return decode_fmat(read_bytes(path), path)


__all__ = ['encode_fmat', 'decode_fmat', 'save_fmat', 'load_fmat']
