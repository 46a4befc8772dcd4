"""
crnn-kws - small-footprint keyword spotting engine
"""
import logging
import os
from typing import Optional

logger = logging.getLogger(__name__)

__version__ = "1.0.0"


def create_engine_env(config_name: Optional[str] = None, log_level: Optional[str] = None,
                      log_format: Optional[str] = None):
    """
    Process setup shared by the command line and the scripts

    Args:
        config_name: Environment name (development, production, testing);
            defaults to $KWS_ENV
        log_level: Overrides the environment's LOG_LEVEL
        log_format: Overrides the environment's LOG_FORMAT ('text' or 'json')

    Returns:
        The selected environment config class
    """
    from configs import get_config
    from app.utils.logging_config import setup_logging

    if config_name is None:
        config_name = os.getenv('KWS_ENV', 'development')

    config_class = get_config(config_name)
    config_class.init_dirs()
    setup_logging(
        level=log_level or config_class.LOG_LEVEL,
        log_file=config_class.LOG_FILE,
        fmt=log_format or config_class.LOG_FORMAT,
        max_bytes=config_class.LOG_MAX_BYTES,
        backup_count=config_class.LOG_BACKUP_COUNT,
    )

    logger.debug(
        "Environment ready",
        extra={'app': config_class.APP_NAME, 'version': config_class.VERSION, 'env': config_name}
    )
    return config_class
