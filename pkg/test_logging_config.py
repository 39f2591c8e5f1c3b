#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль для тестирования настройки логирования.
"""

import logging
import os
import tempfile
import unittest

from logging_config import COMPONENTS, get_logger, setup_logging


class TestLoggingConfig(unittest.TestCase):
    """Тесты для setup_logging и логгеров компонентов"""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.log_file = os.path.join(self.temp_dir.name, "logs", "graphtune.log")

    def tearDown(self):
        for name in [None] + COMPONENTS:
            logger = logging.getLogger(name)
            for handler in logger.handlers[:]:
                handler.close()
                logger.removeHandler(handler)
        self.temp_dir.cleanup()

    def test_string_level_and_files(self):
        """Уровень задается строкой, файлы логов создаются для каждого компонента"""
        setup_logging("DEBUG", self.log_file)

        self.assertEqual(logging.getLogger().level, logging.DEBUG)
        self.assertTrue(os.path.exists(self.log_file))
        component_file = os.path.join(self.temp_dir.name, "logs", "graphtune_feedback_engine.log")
        self.assertTrue(os.path.exists(component_file))

        get_logger("feedback_engine").info("проверка")
        for handler in get_logger("feedback_engine").handlers:
            handler.flush()
        with open(component_file, encoding="utf-8") as f:
            self.assertIn("feedback_engine - INFO - проверка", f.read())

    def test_console_only(self):
        """Без файла логов остается только консольный обработчик"""
        setup_logging(logging.WARNING)

        root = logging.getLogger()
        self.assertEqual(len(root.handlers), 1)
        self.assertIsInstance(root.handlers[0], logging.StreamHandler)
        self.assertEqual(get_logger("sparse_solver").level, logging.WARNING)
        self.assertEqual(get_logger("sparse_solver").handlers, [])

    def test_repeated_setup_does_not_duplicate(self):
        """Повторная настройка не дублирует обработчики"""
        setup_logging("INFO", self.log_file)
        setup_logging("INFO", self.log_file)

        self.assertEqual(len(get_logger("online_learner").handlers), 1)
        self.assertEqual(len(logging.getLogger().handlers), 2)


if __name__ == '__main__':
    unittest.main()
