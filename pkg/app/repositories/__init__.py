"""
Repositories - Artifact persistence layer
"""
from app.repositories.wav_repository import load_wav, write_wav, write_wav_float32
from app.repositories.feature_repository import save_fmat, load_fmat
from app.repositories.checkpoint_repository import save_checkpoint, load_checkpoint
from app.repositories.posterior_repository import save_posteriors, load_posteriors
from app.repositories.manifest_repository import ManifestRepository
from app.repositories.feature_cache_repository import FeatureCacheRepository

__all__ = [
    'load_wav',
    'write_wav',
    'write_wav_float32',
    'save_fmat',
    'load_fmat',
    'save_checkpoint',
    'load_checkpoint',
    'save_posteriors',
    'load_posteriors',
    'ManifestRepository',
    'FeatureCacheRepository',
]
