"""
Tests for environment-driven settings
"""

import os
import unittest
from unittest.mock import patch

from pydantic import ValidationError

from entbench.settings import Settings, get_settings


class TestSettings(unittest.TestCase):

    def setUp(self):
        get_settings.cache_clear()

    def tearDown(self):
        get_settings.cache_clear()

    @patch.dict(os.environ, {}, clear=True)
    def test_defaults(self):
        settings = Settings(_env_file=None)
        self.assertEqual(settings.LOG, "INFO")
        self.assertEqual(settings.THREADS, 1)
        self.assertTrue(settings.PROGRESS)

    @patch.dict(os.environ, {"ENTBENCH_LOG": "debug", "ENTBENCH_THREADS": "3", "ENTBENCH_PROGRESS": "false"})
    def test_environment_overrides(self):
        settings = get_settings()
        self.assertEqual(settings.LOG, "DEBUG")
        self.assertEqual(settings.THREADS, 3)
        self.assertFalse(settings.PROGRESS)
        self.assertIs(get_settings(), settings)

    @patch.dict(os.environ, {"ENTBENCH_LOG": "LOUD"})
    def test_unknown_level(self):
        with self.assertRaises(ValidationError):
            Settings(_env_file=None)

    @patch.dict(os.environ, {"ENTBENCH_THREADS": "0"})
    def test_threads_must_be_positive(self):
        with self.assertRaises(ValidationError):
            Settings(_env_file=None)


if __name__ == '__main__':
    unittest.main()
