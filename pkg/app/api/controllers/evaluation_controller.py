"""
Evaluation Controller - streaming eval and detection commands
"""
import logging
import os
from dataclasses import replace
from typing import List, Optional, Sequence

from app.core.config import CliConfig
from app.core.errors import UsageError
from app.models.enums import ManifestKind
from app.models.evaluation import CLEAN, DetectionEvent, EvalCondition
from app.repositories.checkpoint_repository import load_checkpoint
from app.repositories.manifest_repository import ManifestRepository, require_records
from app.repositories.wav_repository import load_wav
from app.services.network_service import KeywordScorer
from app.services.streaming_service import detect, evaluate, stream_scores, write_report_csv, write_summary
from app.services.training_service import load_audio_pool, load_impulse_responses

logger = logging.getLogger(__name__)


def condition_path(path: str, condition: EvalCondition) -> str:
    """
    Output path of a condition's report, next to the clean one

    Examples:
        >>> condition_path("out/det.csv", EvalCondition.from_snr(5.0))
        'out/det.snr5.csv'
    """
    if condition.is_clean:
        return path
    stem, ext = os.path.splitext(path)
    return f"{stem}.{condition.name}{ext}"


class EvaluationController:
    """Controller for eval and detect"""

    def _pool(self, path: Optional[str], records, kind: ManifestKind):
        """Records of ``kind`` from ``path``, else from the evaluation manifest itself"""
        source = ManifestRepository(path).load() if path else records
        return [r for r in source if r.kind == kind.value]

    def evaluate(
        self,
        cfg: CliConfig,
        ckpt_path: str,
        manifest_path: str,
        out_path: str,
        summary_path: Optional[str] = None,
        workers: int = 1,
        show_progress: bool = False,
        snr_db: Sequence[float] = (),
        noise_manifest: Optional[str] = None,
        rir_manifest: Optional[str] = None
    ) -> dict:
        """
        DET report of a checkpoint on an evaluation manifest

        The clean recordings are always evaluated. Each value in ``snr_db``
        adds a condition with noise mixed in at that SNR, and
        ``rir_manifest`` adds a far-field condition. Every condition gets
        its own CSV and JSON summary (``det.csv``, ``det.snr5.csv``,
        ``det.rir.csv`` ...).

        Args:
            noise_manifest: Noise records for the SNR conditions (default:
                noise records of the evaluation manifest)
            rir_manifest: Impulse response records for the far-field condition

        Returns:
            The clean summary, with the other conditions under 'conditions'

        Raises:
            UsageError: SNR conditions without any noise records
        """
        scorer = KeywordScorer(load_checkpoint(ckpt_path))
        all_records = ManifestRepository(manifest_path).load()
        records = require_records(
            [r for r in all_records if r.kind == ManifestKind.EXAMPLE.value],
            manifest_path,
        )

        conditions = [CLEAN] + [EvalCondition.from_snr(v) for v in snr_db]
        noise_pool, rirs = [], []
        if snr_db:
            noise_records = self._pool(noise_manifest, all_records, ManifestKind.NOISE)
            if not noise_records:
                raise UsageError("--snr needs noise records (pass --noise-manifest)")
            noise_pool = load_audio_pool(noise_records)
        if rir_manifest:
            rirs = load_impulse_responses(require_records(
                self._pool(rir_manifest, all_records, ManifestKind.RIR), rir_manifest, what="rir"
            ))
            conditions.append(EvalCondition.far_field())

        summary_path = summary_path or os.path.splitext(out_path)[0] + ".summary.json"
        results = {}
        for condition in conditions:
            report, _ = evaluate(
                records, scorer, cfg.stream,
                workers=workers,
                show_progress=show_progress,
                condition=condition,
                noise_pool=noise_pool,
                rirs=rirs,
                seed=cfg.augment.rng_seed,
            )
            report_path = condition_path(out_path, condition)
            condition_summary_path = condition_path(summary_path, condition)
            write_report_csv(report_path, report)
            write_summary(condition_summary_path, report)

            summary = report.summary()
            summary.update({'report': report_path, 'summary': condition_summary_path})
            results[condition.name] = summary

        summary = results.pop(CLEAN.name)
        if results:
            summary['conditions'] = results
        return summary

    def detect(self, cfg: CliConfig, ckpt_path: str, wav_path: str, threshold: Optional[float] = None,
               refractory_s: Optional[float] = None) -> List[DetectionEvent]:
        """Stream one recording and return its detections"""
        stream = cfg.stream
        if threshold is not None:
            stream = replace(stream, threshold=threshold)
        if refractory_s is not None:
            stream = replace(stream, refractory_s=refractory_s)

        scorer = KeywordScorer(load_checkpoint(ckpt_path))
        track = stream_scores(load_wav(wav_path), scorer, stream, source=wav_path)
        events = detect(track, stream.threshold, stream.refractory_s)

        logger.info("Detection complete", extra={'path': wav_path, 'windows': len(track), 'events': len(events)})
        return events


evaluation_controller = EvaluationController()
