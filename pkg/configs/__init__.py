"""
Process environments - logging, worker and progress defaults per deployment
"""
import logging
import os
from typing import Optional, Type

from configs.base import BaseConfig
from configs.development import DevelopmentConfig
from configs.production import ProductionConfig
from configs.testing import TestingConfig

logger = logging.getLogger(__name__)

ENVIRONMENTS = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
}

DEFAULT_ENV = 'development'


def get_config(env: Optional[str] = None) -> Type[BaseConfig]:
    """
    Environment class by name

    Args:
        env: development, production or testing; None reads $KWS_ENV.
            Unknown names fall back to development.

    Examples:
        >>> get_config('testing').DEFAULT_WORKERS
        1
    """
    if env is None:
        env = os.getenv('KWS_ENV', DEFAULT_ENV)

    config_class = ENVIRONMENTS.get(env)
    if config_class is None:
        logger.warning("Unknown environment, using development", extra={'env': env})
        config_class = ENVIRONMENTS[DEFAULT_ENV]
    return config_class


__all__ = [
    'BaseConfig',
    'DevelopmentConfig',
    'ProductionConfig',
    'TestingConfig',
    'ENVIRONMENTS',
    'get_config',
]
