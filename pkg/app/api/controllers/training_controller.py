"""
Training Controller - augment, train and mine commands
"""
import logging
import os
from typing import List, Optional, Tuple

from app.core.config import CliConfig
from app.models.audio import AudioClip
from app.models.augmentation import ImpulseResponse
from app.models.enums import ManifestKind, Split
from app.models.training import ManifestRecord
from app.repositories.checkpoint_repository import load_checkpoint, save_checkpoint
from app.repositories.binary_format import write_bytes
from app.repositories.manifest_repository import ManifestRepository, require_records
from app.repositories.wav_repository import load_wav
from app.services.augment_service import build_feature_cache, clean_example
from app.services.mining_service import mine_hard_negatives
from app.services.network_service import KeywordScorer
from app.services.training_service import (
    evaluate_accuracy,
    load_audio_pool,
    load_impulse_responses,
    load_windows,
    train,
)
from app.utils.serialization import dumps_jsonl

logger = logging.getLogger(__name__)


class TrainingController:
    """Controller for dataset augmentation, training and hard negative mining"""

    # ==================== POOLS ====================

    def _pools(self, cfg: CliConfig, records: List[ManifestRecord]) -> Tuple[List[AudioClip], List[ImpulseResponse]]:
        noise = load_audio_pool([r for r in records if r.kind == ManifestKind.NOISE.value])
        rirs = load_impulse_responses([r for r in records if r.kind == ManifestKind.RIR.value])
        for path in cfg.augment.rir_paths:
            clip = load_wav(path)
            rirs.append(ImpulseResponse(clip.samples, clip.sample_rate, label=os.path.basename(path)))
        return noise, rirs

    # ==================== COMMANDS ====================

    def augment(self, cfg: CliConfig, manifest_path: str, out_path: str, epoch: int = 0,
                workers: int = 1) -> dict:
        """Write one epoch of augmented training features as a msgpack cache"""
        records = ManifestRepository(manifest_path).load()
        examples = require_records(
            [r for r in records if r.kind == ManifestKind.EXAMPLE.value and r.split == Split.TRAIN.value],
            manifest_path,
        )
        noise, rirs = self._pools(cfg, records)
        if not noise:
            logger.warning("No noise records in manifest; caching clean features", extra={'manifest': manifest_path})

        windows = load_windows(examples, cfg.feature, cfg.stream.window_s)
        cached = build_feature_cache(out_path, windows, cfg.augment, noise, cfg.feature, epoch, rirs, workers)
        return {
            'path': out_path,
            'examples': len(cached),
            'positives': sum(ex.label for ex in cached),
            'epoch': epoch,
        }

    def train(self, cfg: CliConfig, manifest_path: str, out_path: str, metrics_path: Optional[str] = None,
              init_path: Optional[str] = None, workers: int = 1, show_progress: bool = False) -> dict:
        """
        Train a checkpoint on a manifest

        With ``init_path`` training continues from that checkpoint (and its
        architecture), e.g. after hard negative mining.
        """
        records = ManifestRepository(manifest_path).load()
        examples = require_records([r for r in records if r.kind == ManifestKind.EXAMPLE.value], manifest_path)
        noise, rirs = self._pools(cfg, records)

        model_cfg, init = cfg.model, None
        if init_path:
            start = load_checkpoint(init_path)
            model_cfg, init = start.config, start.weights
            logger.info("Continuing from checkpoint", extra={'init': init_path})

        metrics_path = metrics_path or cfg.paths.metrics or os.path.splitext(out_path)[0] + ".metrics.csv"
        ckpt, metrics = train(
            examples,
            model_cfg,
            cfg.train,
            feature_cfg=cfg.feature,
            augment_spec=cfg.augment,
            noise_pool=noise,
            rirs=rirs,
            metrics_path=metrics_path,
            init=init,
            window_s=cfg.stream.window_s,
            workers=workers,
            show_progress=show_progress,
        )
        save_checkpoint(ckpt, out_path)

        train_windows = load_windows([r for r in examples if r.split == Split.TRAIN.value], cfg.feature,
                                     cfg.stream.window_s)
        accuracy = evaluate_accuracy(ckpt, [clean_example(w.clip, w.label, cfg.feature) for w in train_windows])
        last = metrics[-1]
        return {
            'checkpoint': out_path,
            'metrics': metrics_path,
            'epochs': len(metrics),
            'steps': last.step,
            'train_loss': last.train_loss,
            'dev_loss': last.dev_loss,
            'train_accuracy': accuracy,
        }

    def mine(self, cfg: CliConfig, ckpt_path: str, manifest_path: str, tau: float, cap: Optional[int] = None,
             out_path: Optional[str] = None, append_to: Optional[str] = None, workers: int = 1) -> dict:
        """
        Mine hard negatives from the example files of a keyword-free manifest

        Additions go to ``out_path`` as JSONL and/or are appended to the
        manifest ``append_to`` so training can continue on it.
        """
        scorer = KeywordScorer(load_checkpoint(ckpt_path))
        records = require_records(
            [r for r in ManifestRepository(manifest_path).load() if r.kind == ManifestKind.EXAMPLE.value],
            manifest_path,
        )
        result = mine_hard_negatives(scorer, records, tau, cap, cfg.stream, workers)

        if out_path:
            write_bytes(out_path, dumps_jsonl(r.to_dict() for r in result.additions))
        if append_to:
            ManifestRepository(append_to).append(result.additions)

        return {
            'additions': len(result.additions),
            'skipped': result.skipped_count,
            'out': out_path,
            'appended_to': append_to,
        }


training_controller = TrainingController()
