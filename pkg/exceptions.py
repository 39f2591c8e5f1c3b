#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Иерархия исключений системы подбора ширины гауссова ядра.
"""

from typing import Optional

import numpy as np


class GraphTuneError(Exception):
    """Базовое исключение системы"""


class StructuralError(GraphTuneError):
    """Несовпадение размерностей или некорректная структура данных"""


class ParameterError(GraphTuneError, ValueError):
    """Недопустимое значение параметра (σ ≤ 0, k ≥ n и т.п.)"""


class IndefiniteMatrixError(GraphTuneError):
    """
    Метод сопряженных градиентов обнаружил направление с pᵀAp ≤ 0.
    """

    def __init__(self, message: str, iterate: Optional[np.ndarray] = None, iterations: int = 0):
        super().__init__(message)
        self.iterate = iterate
        self.iterations = iterations


class SingularMatrixError(GraphTuneError):
    """Матрица вырождена в пределах допуска ведущего элемента"""


class FormatError(GraphTuneError):
    """Ошибка формата входного файла"""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (смещение {offset})"
        super().__init__(message)
        self.offset = offset


class DataError(GraphTuneError):
    """Недостаточно данных для постановки задачи"""


class ContractViolationError(GraphTuneError):
    """Поставщик обратной связи нарушил контракт"""


class ConfigError(GraphTuneError, ValueError):
    """Некорректная конфигурация эксперимента"""
