"""
Base Configuration - Shared settings across all environments
"""
import os


class BaseConfig:
    """
    Base configuration class with shared settings

    All environment-specific configs inherit from this. Engine settings
    (model, training, streaming) live in the JSON config loaded by
    app.core.config; this class only covers the process environment.
    """

    # ==================== APPLICATION ====================

    APP_NAME = "crnn-kws"
    VERSION = "1.0.0"

    DEBUG = False
    TESTING = False
    ENV = 'base'

    # ==================== LOGGING ====================

    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('LOG_FILE')  # None = stderr only
    LOG_FORMAT = os.getenv('LOG_FORMAT', 'text')  # 'text' or 'json'
    LOG_MAX_BYTES = 10 * 1024 * 1024  # 10MB
    LOG_BACKUP_COUNT = 5

    # ==================== PERFORMANCE ====================

    # Threads for eval / augment / mine
    DEFAULT_WORKERS = int(os.getenv('KWS_WORKERS', '1'))

    SHOW_PROGRESS = os.getenv('KWS_PROGRESS', 'true').lower() == 'true'

    # ==================== PATHS ====================

    BASE_DIR = os.path.abspath(os.path.dirname(os.path.dirname(__file__)))
    DATA_DIR = os.getenv('KWS_DATA_DIR', os.path.join(BASE_DIR, 'data'))
    LOGS_DIR = os.path.join(BASE_DIR, 'logs')

    @classmethod
    def init_dirs(cls):
        """Create the data and log directories"""
        os.makedirs(cls.DATA_DIR, exist_ok=True)
        if cls.LOG_FILE:
            os.makedirs(os.path.dirname(os.path.abspath(cls.LOG_FILE)), exist_ok=True)
