"""
Feature Cache Repository - msgpack cache of augmented training examples
"""
import logging
from typing import List, Tuple

import msgpack

from app.core.errors import CorruptionError, FormatError
from app.models.audio import FeatureMatrix
from app.models.training import LabeledExample
from app.repositories.binary_format import read_bytes, write_bytes
from app.utils.serialization import dumps_msgpack, loads_msgpack

logger = logging.getLogger(__name__)

CACHE_FORMAT = "kws-feature-cache"
CACHE_VERSION = 1


class FeatureCacheRepository:
    """Augmented examples plus the settings that produced them"""

    def __init__(self, path: str):
        self.path = path

    def save(self, examples: List[LabeledExample], meta: dict):
        payload = {
            'format': CACHE_FORMAT,
            'version': CACHE_VERSION,
            'meta': meta,
            'examples': [
                {
                    'features': ex.features.values,
                    'label': ex.label,
                    'source': ex.source,
                    'snr_db': ex.snr_db,
                    'shift_ms': ex.shift_ms,
                }
                for ex in examples
            ],
        }
        write_bytes(self.path, dumps_msgpack(payload))
        logger.info("Wrote feature cache", extra={'path': self.path, 'examples': len(examples)})

    def load(self) -> Tuple[List[LabeledExample], dict]:
        try:
            payload = loads_msgpack(read_bytes(self.path))
        except (msgpack.ExtraData, msgpack.FormatError, msgpack.StackError, ValueError) as e:
            raise CorruptionError(f"{self.path}: unreadable feature cache ({e})")

        if not isinstance(payload, dict) or payload.get('format') != CACHE_FORMAT:
            raise FormatError(f"{self.path}: not a feature cache")

        examples = [
            LabeledExample(
                features=FeatureMatrix(item['features']),
                label=int(item['label']),
                source=item.get('source'),
                snr_db=item.get('snr_db'),
                shift_ms=item.get('shift_ms'),
            )
            for item in payload['examples']
        ]
        return examples, payload.get('meta', {})
