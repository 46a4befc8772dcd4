"""
Development Configuration - local experiments
"""
from configs.base import BaseConfig


class DevelopmentConfig(BaseConfig):
    """DEBUG logging to stderr, progress bars when attached to a terminal"""

    DEBUG = True
    ENV = 'development'

    LOG_LEVEL = 'DEBUG'
