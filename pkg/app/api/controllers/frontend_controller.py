"""
Frontend Controller - WAV to FMAT feature files
"""
import logging
import os
from typing import Optional

from app.core.config import CliConfig
from app.repositories.feature_repository import save_fmat
from app.repositories.wav_repository import load_wav
from app.services.frontend_service import featurize, log_mel

logger = logging.getLogger(__name__)


class FrontendController:
    """Controller for the featurize command"""

    def featurize(self, cfg: CliConfig, wav_path: str, out_path: Optional[str] = None,
                  debug_log_mel: bool = False) -> dict:
        """
        Featurize a WAV file into an FMAT file

        Args:
            cfg: Engine config (feature section)
            wav_path: Input recording
            out_path: Output path (input stem + .fmat when None)
            debug_log_mel: Write log-mel instead of PCEN features

        Returns:
            Summary with the output path and matrix shape
        """
        clip = load_wav(wav_path)
        features = log_mel(clip, cfg.feature) if debug_log_mel else featurize(clip, cfg.feature)

        out_path = out_path or os.path.splitext(wav_path)[0] + ".fmat"
        save_fmat(out_path, features)

        logger.info("Featurized", extra={'path': wav_path, 'out': out_path, 'shape': list(features.shape)})
        return {'path': out_path, 'rows': features.n_mels, 'cols': features.n_frames}


frontend_controller = FrontendController()
