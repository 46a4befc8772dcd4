"""
Manifest Repository - JSONL dataset manifests
"""
import logging
import os
from typing import Iterable, List, Optional

import orjson
from marshmallow import ValidationError

from app.api.schemas.manifest_schema import ManifestRecordSchema
from app.core.errors import ConfigError, FormatError
from app.models.enums import ManifestKind
from app.models.training import ManifestRecord
from app.repositories.binary_format import read_bytes, write_bytes

logger = logging.getLogger(__name__)


class ManifestRepository:
    """
    Read and write JSONL manifests

    Relative audio paths are resolved against the manifest's directory on
    load and written back as given.
    """

    def __init__(self, path: str):
        self.path = path
        self.base_dir = os.path.dirname(os.path.abspath(path))
        self._schema = ManifestRecordSchema()

    # ==================== READ ====================

    def load(self) -> List[ManifestRecord]:
        """
        Parse every non-blank line

        Raises:
            FormatError: Line is not JSON or fails validation (line number in payload)
        """
        data = read_bytes(self.path)
        records = []
        for line_no, line in enumerate(data.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw = orjson.loads(line)
                record = self._schema.load(raw)
            except orjson.JSONDecodeError as e:
                raise FormatError(
                    f"{self.path}:{line_no}: not valid JSON ({e})",
                    payload={'path': self.path, 'line': line_no}
                )
            except ValidationError as e:
                raise FormatError(
                    f"{self.path}:{line_no}: invalid record {e.messages}",
                    payload={'path': self.path, 'line': line_no}
                )
            record.path = self.resolve(record.path)
            records.append(record)

        logger.debug("Loaded manifest", extra={'path': self.path, 'records': len(records)})
        return records

    def load_examples(self, split: Optional[str] = None) -> List[ManifestRecord]:
        records = [r for r in self.load() if r.kind == ManifestKind.EXAMPLE.value]
        if split is not None:
            records = [r for r in records if r.split == split]
        return records

    def load_pool(self, kind: ManifestKind) -> List[ManifestRecord]:
        return [r for r in self.load() if r.kind == kind.value]

    def resolve(self, path: str) -> str:
        if os.path.isabs(path):
            return path
        return os.path.normpath(os.path.join(self.base_dir, path))

    # ==================== WRITE ====================

    def save(self, records: Iterable[ManifestRecord]):
        write_bytes(self.path, _encode(records))

    def append(self, records: Iterable[ManifestRecord]) -> int:
        data = _encode(records)
        directory = os.path.dirname(self.path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(self.path, 'ab') as handle:
            handle.write(data)
        return data.count(b"\n")


def _encode(records: Iterable[ManifestRecord]) -> bytes:
    return b"".join(orjson.dumps(r.to_dict()) + b"\n" for r in records)


def require_records(records: List[ManifestRecord], path: str, what: str = "example") -> List[ManifestRecord]:
    if not records:
        raise ConfigError(f"manifest {path} has no {what} records", payload={'path': path})
    return records
