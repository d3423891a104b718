"""
Unit tests for the logging helpers.
"""
import os
import logging
import pytest
from unittest.mock import patch

from src.utils import logging_utils


@pytest.mark.unit
class TestLogging:
    """Tests for log level resolution and setup."""

    def test_explicit_level(self):
        """Test that an explicit level wins."""
        assert logging_utils.resolve_log_level('debug') == logging.DEBUG

    def test_environment_level(self):
        """Test the environment variable."""
        with patch.dict(os.environ, {'PVBAT_LOG_LEVEL': 'WARNING'}), \
             patch('src.utils.logging_utils.load_dotenv'):
            assert logging_utils.resolve_log_level() == logging.WARNING

    def test_unknown_level(self):
        """Test that an unknown name falls back to INFO."""
        assert logging_utils.resolve_log_level('LOUD') == logging.INFO

    def test_log_file(self, temp_dir):
        """Test that messages reach the log file."""
        path = str(temp_dir.join('logs', 'run.log'))

        logging_utils.setup_logging('INFO', path)
        logging.getLogger('pvbat.test').info('hello file')
        for handler in logging.getLogger().handlers:
            handler.flush()

        with open(path) as f:
            assert 'hello file' in f.read()
        assert logging.getLogger('__cvxpy__').level == logging.WARNING
        logging_utils.setup_logging('WARNING')
