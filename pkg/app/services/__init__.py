"""
Services Layer - Signal processing, model and evaluation algorithms
"""
from app.services.frontend_service import featurize, log_mel
from app.services.network_service import KeywordScorer, model_forward, init_weights
from app.services.profiler_service import param_count, flops_estimate, architecture_sweep
from app.services.training_service import ce_loss, backward, adam_step, train
from app.services.mining_service import mine_hard_negatives
from app.services.alignment_service import smooth_scores, align_keyword, chop_keyword
from app.services.augment_service import mix_at_snr, random_jitter, apply_rir, make_training_example
from app.services.streaming_service import (
    stream_scores,
    detect,
    match_detections,
    det_curve,
    frr_at_target_fa
)

__all__ = [
    'featurize',
    'log_mel',
    'KeywordScorer',
    'model_forward',
    'init_weights',
    'param_count',
    'flops_estimate',
    'architecture_sweep',
    'ce_loss',
    'backward',
    'adam_step',
    'train',
    'mine_hard_negatives',
    'smooth_scores',
    'align_keyword',
    'chop_keyword',
    'mix_at_snr',
    'random_jitter',
    'apply_rir',
    'make_training_example',
    'stream_scores',
    'detect',
    'match_detections',
    'det_curve',
    'frr_at_target_fa',
]
