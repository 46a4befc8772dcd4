"""
Testing Configuration - Settings for the test suite
"""
import os
import tempfile

from configs.base import BaseConfig


class TestingConfig(BaseConfig):
    """
    Testing environment configuration

    Single worker, no progress bars, data written under the system temp directory.
    """

    TESTING = True
    ENV = 'testing'

    LOG_LEVEL = 'WARNING'
    LOG_FILE = None

    DEFAULT_WORKERS = 1
    SHOW_PROGRESS = False

    DATA_DIR = os.path.join(tempfile.gettempdir(), 'kws-tests')
