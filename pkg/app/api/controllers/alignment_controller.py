"""
Alignment Controller - CPST posteriors to keyword spans and chopped clips
"""
import logging
import os
from typing import List, Optional, Sequence

from app.core.config import CliConfig
from app.core.errors import AlignmentError, FormatError
from app.models.alignment import AlignmentSpan
from app.models.training import ManifestRecord
from app.repositories.binary_format import read_bytes, write_bytes
from app.repositories.manifest_repository import ManifestRepository
from app.repositories.wav_repository import load_wav, write_wav
from app.services.alignment_service import align_file, chop_bounds, chop_keyword
from app.utils.serialization import dumps_jsonl, loads_jsonl

logger = logging.getLogger(__name__)


class AlignmentController:
    """Controller for the align and chop commands"""

    def align(self, cfg: CliConfig, cpst_paths: Sequence[str], out_path: Optional[str] = None) -> List[dict]:
        """
        Align every posterior file

        Returns:
            Span records in input order; also written as JSONL to ``out_path``
        """
        records = [align_file(path, cfg.align) for path in cpst_paths]
        if out_path:
            write_bytes(out_path, dumps_jsonl(records))

        unordered = sum(1 for r in records if not r['ordered'])
        logger.info("Aligned posteriors", extra={'files': len(records), 'unordered': unordered})
        return records

    def chop(self, cfg: CliConfig, spans_path: str, out_dir: str,
             manifest_path: Optional[str] = None) -> dict:
        """
        Cut padded keyword clips out of the recordings named in a spans file

        Unordered spans are skipped and counted. With ``manifest_path`` a
        positive manifest record is written per clip, its ``span_s`` relative
        to the clip start.
        """
        try:
            spans = loads_jsonl(read_bytes(spans_path))
        except ValueError as e:
            raise FormatError(f"{spans_path}: not a JSONL spans file ({e})")

        base_dir = os.path.dirname(os.path.abspath(spans_path))
        os.makedirs(out_dir, exist_ok=True)

        records, skipped = [], 0
        for index, item in enumerate(spans):
            try:
                wav_path = item['path']
                span = AlignmentSpan(
                    begin_frame=int(item.get('begin_frame', 0)),
                    end_frame=int(item.get('end_frame', 0)),
                    begin_s=float(item['begin_s']),
                    end_s=float(item['end_s']),
                )
            except (KeyError, TypeError, ValueError):
                raise FormatError(f"{spans_path}:{index + 1}: span record needs path, begin_s and end_s")

            if not os.path.isabs(wav_path):
                wav_path = os.path.join(base_dir, wav_path)
            clip = load_wav(wav_path)

            try:
                chopped = chop_keyword(clip, span, cfg.align.pad_s)
            except AlignmentError as e:
                logger.warning("Skipping unordered span", extra={'path': wav_path, 'error': e.message})
                skipped += 1
                continue

            start_s, _ = chop_bounds(clip, span, cfg.align.pad_s)
            stem = os.path.splitext(os.path.basename(wav_path))[0]
            clip_path = os.path.join(out_dir, f"{stem}_{index:05d}.wav")
            write_wav(clip_path, chopped)
            records.append(ManifestRecord(
                path=os.path.abspath(clip_path),
                label="positive",
                span_s=(round(span.begin_s - start_s, 6), round(span.end_s - start_s, 6)),
            ))

        if manifest_path:
            ManifestRepository(manifest_path).save(records)

        logger.info("Chopped keyword clips", extra={'clips': len(records), 'skipped': skipped})
        return {'clips': len(records), 'skipped': skipped, 'out_dir': out_dir, 'manifest': manifest_path}


alignment_controller = AlignmentController()
