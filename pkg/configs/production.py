"""
Production Configuration - Settings for batch jobs on shared machines
"""
import os

from configs.base import BaseConfig


class ProductionConfig(BaseConfig):
    """
    Production environment configuration

    Features:
    - WARNING logging, JSON lines when LOG_FORMAT is unset
    - Rotating log file under logs/
    - Progress bars off
    """

    ENV = 'production'

    LOG_LEVEL = os.getenv('LOG_LEVEL', 'WARNING')
    LOG_FORMAT = os.getenv('LOG_FORMAT', 'json')
    LOG_FILE = os.getenv('LOG_FILE', os.path.join(BaseConfig.LOGS_DIR, 'kws.log'))

    DEFAULT_WORKERS = int(os.getenv('KWS_WORKERS', str(os.cpu_count() or 1)))
    SHOW_PROGRESS = False
