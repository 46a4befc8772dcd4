"""
Fast serialization with orjson (JSON / JSONL) and msgpack (feature cache)
"""
import logging
from typing import Any, Iterable, Iterator, List

import msgpack
import numpy as np
import orjson

logger = logging.getLogger(__name__)

_JSON_OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS


class FastSerializer:
    """orjson / msgpack serializer with numpy awareness"""

    @staticmethod
    def dumps_json(obj: Any, indent: bool = False) -> bytes:
        option = _JSON_OPTIONS | (orjson.OPT_INDENT_2 if indent else 0)
        return orjson.dumps(obj, option=option)

    @staticmethod
    def loads_json(data: bytes) -> Any:
        return orjson.loads(data)

    @staticmethod
    def dumps_jsonl(records: Iterable[Any]) -> bytes:
        """One JSON object per line, trailing newline included"""
        return b"".join(orjson.dumps(r, option=_JSON_OPTIONS) + b"\n" for r in records)

    @staticmethod
    def iter_jsonl(data: bytes) -> Iterator[Any]:
        """Decode JSONL, skipping blank lines"""
        for line in data.splitlines():
            if line.strip():
                yield orjson.loads(line)

    @staticmethod
    def dumps_msgpack(obj: Any) -> bytes:
        """msgpack with numpy arrays encoded as (dtype, shape, bytes) maps"""
        return msgpack.packb(obj, use_bin_type=True, default=_encode_array)

    @staticmethod
    def loads_msgpack(data: bytes) -> Any:
        return msgpack.unpackb(data, raw=False, object_hook=_decode_array)


def _encode_array(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        array = np.ascontiguousarray(obj)
        return {
            '__ndarray__': True,
            'dtype': array.dtype.str,
            'shape': list(array.shape),
            'data': array.tobytes(),
        }
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _decode_array(obj: dict) -> Any:
    if obj.get('__ndarray__'):
        return np.frombuffer(obj['data'], dtype=np.dtype(obj['dtype'])).reshape(obj['shape']).copy()
    return obj


# Module-level instance
serializer = FastSerializer()


def dumps_json(obj: Any, indent: bool = False) -> bytes:
    """Shortcut for JSON serialization"""
    return serializer.dumps_json(obj, indent=indent)


def loads_json(data: bytes) -> Any:
    """Shortcut for JSON deserialization"""
    return serializer.loads_json(data)


def dumps_jsonl(records: Iterable[Any]) -> bytes:
    return serializer.dumps_jsonl(records)


def loads_jsonl(data: bytes) -> List[Any]:
    return list(serializer.iter_jsonl(data))


def dumps_msgpack(obj: Any) -> bytes:
    """Shortcut for msgpack serialization"""
    return serializer.dumps_msgpack(obj)


def loads_msgpack(data: bytes) -> Any:
    """Shortcut for msgpack deserialization"""
    return serializer.loads_msgpack(data)
