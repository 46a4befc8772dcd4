"""
Shared helpers for the little-endian binary artifact formats (FMAT, CKWS, CPST)

Every format starts with a 4-byte magic followed by a u32 version.
"""
import logging
import os
import struct
from typing import Tuple

import numpy as np

from app.core.errors import CorruptionError, DataError, FormatError, UnsupportedVersionError
from app.models.enums import Constants

logger = logging.getLogger(__name__)

PREAMBLE = struct.Struct('<4sI')


def read_bytes(path: str) -> bytes:
    try:
        with open(path, 'rb') as handle:
            return handle.read()
    except FileNotFoundError:
        raise DataError(f"file not found: {path}", payload={'path': path})
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}", payload={'path': path})


def write_bytes(path: str, data: bytes):
    """Write atomically through a temporary sibling file"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    tmp_path = f"{path}.tmp"
    with open(tmp_path, 'wb') as handle:
        handle.write(data)
    os.replace(tmp_path, path)


def check_preamble(data: bytes, magic: bytes, path: str) -> int:
    """
    Validate magic and version

    Returns:
        Offset of the first byte after the preamble

    Raises:
        FormatError: Short file or wrong magic
        UnsupportedVersionError: Version other than the supported one
    """
    if len(data) < PREAMBLE.size:
        raise FormatError(f"{path}: file too short for a {magic.decode()} header")

    found_magic, version = PREAMBLE.unpack_from(data, 0)
    if found_magic != magic:
        raise FormatError(
            f"{path}: bad magic {found_magic!r}, expected {magic!r}",
            payload={'path': path}
        )
    if version != Constants.FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: unsupported {magic.decode()} version {version}",
            payload={'path': path, 'version': version}
        )
    return PREAMBLE.size


def unpack_header(fmt: struct.Struct, data: bytes, offset: int, path: str) -> Tuple[tuple, int]:
    if len(data) < offset + fmt.size:
        raise FormatError(f"{path}: truncated header")
    return fmt.unpack_from(data, offset), offset + fmt.size


def read_f32_block(data: bytes, offset: int, shape: Tuple[int, ...], path: str) -> Tuple[np.ndarray, int]:
    """Read a row-major float32 LE block, CorruptionError when truncated"""
    count = int(np.prod(shape, dtype=np.int64))
    end = offset + 4 * count
    if len(data) < end:
        raise CorruptionError(
            f"{path}: payload truncated ({len(data) - offset} of {4 * count} bytes)",
            payload={'path': path}
        )
    block = np.frombuffer(data, dtype='<f4', count=count, offset=offset).reshape(shape)
    return block.astype(np.float32), end


def f32_bytes(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype='<f4').tobytes()
