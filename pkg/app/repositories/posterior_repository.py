"""
Posterior Repository - CPST character posterior files

Layout: "CPST", u32 version, u32 K, u32 T, f32 frame_rate, f32 origin_time_s,
u32 chars byte length, UTF-8 chars, K*T f32 row-major scores (little-endian).
"""
import logging
import struct

import numpy as np

from app.core.errors import CorruptionError, FormatError
from app.models.alignment import CharPosteriorMatrix
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

_HEADER = struct.Struct('<IIffI')


def encode_cpst(posteriors: CharPosteriorMatrix) -> bytes:
    chars = posteriors.chars.encode('utf-8')
    return (
        PREAMBLE.pack(Constants.CPST_MAGIC, Constants.FORMAT_VERSION)
        + _HEADER.pack(
            posteriors.n_chars,
            posteriors.n_steps,
            posteriors.frame_rate,
            posteriors.origin_time_s,
            len(chars),
        )
        + chars
        + f32_bytes(posteriors.scores)
    )


def decode_cpst(data: bytes, path: str = "<bytes>") -> CharPosteriorMatrix:
    offset = check_preamble(data, Constants.CPST_MAGIC, path)
    (n_chars, n_steps, frame_rate, origin, chars_len), offset = unpack_header(_HEADER, data, offset, path)

    if len(data) < offset + chars_len:
        raise FormatError(f"{path}: truncated character string")
    try:
        chars = data[offset:offset + chars_len].decode('utf-8')
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: character string is not UTF-8 ({e})")
    offset += chars_len

    if len(chars) != n_chars:
        raise CorruptionError(
            f"{path}: header declares {n_chars} characters, string has {len(chars)}"
        )

    scores, end = read_f32_block(data, offset, (n_chars, n_steps), path)
    if end != len(data):
        raise CorruptionError(f"{path}: {len(data) - end} trailing bytes after payload")

    return CharPosteriorMatrix(
        chars=chars,
        scores=scores.astype(np.float64),
        frame_rate=float(frame_rate),
        origin_time_s=float(origin),
    )


def save_posteriors(path: str, posteriors: CharPosteriorMatrix):
    write_bytes(path, encode_cpst(posteriors))


def load_posteriors(path: str) -> CharPosteriorMatrix:
    return decode_cpst(read_bytes(path), path)


__all__ = ['encode_cpst', 'decode_cpst', 'save_posteriors', 'load_posteriors']
