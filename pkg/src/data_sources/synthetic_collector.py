#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Синтетические задачи: два изотропных гауссовых облака.
"""

import logging
from typing import Optional

import numpy as np

from exceptions import ParameterError
from graph_core import Dataset, ProblemInstance


class SyntheticCollector:
    """
    Генератор синтетических задач небольшого размера
    """

    def __init__(self):
        """Инициализация генератора"""
        self.logger = logging.getLogger('data_sources.synthetic')

    def blobs(self, n: int, separation: float, noise: float = 1.0, seed: int = 0,
              dim: int = 2, n_labeled: Optional[int] = None) -> ProblemInstance:
        """
        Два облака с центрами на расстоянии separation друг от друга.

        Args:
            n: Общее число точек (не меньше 4)
            separation: Расстояние между центрами
            noise: Стандартное отклонение шума
            seed: Зерно генератора
            dim: Размерность
            n_labeled: Размер L (по умолчанию max(2, n // 10), поровну из каждого облака)

        Returns:
            ProblemInstance: Задача с целевыми метками
        """
        if n < 4:
            raise ParameterError(f"Требуется n ≥ 4, получено {n}")
        if dim < 1:
            raise ParameterError(f"Размерность должна быть положительной, получено {dim}")
        n_labeled = max(2, n // 10) if n_labeled is None else int(n_labeled)
        if not 2 <= n_labeled < n:
            raise ParameterError(f"Требуется 2 ≤ |L| < n, получено |L|={n_labeled}")

        rng = np.random.default_rng(seed)
        sizes = (n // 2, n - n // 2)
        center = np.zeros(dim)
        center[0] = separation / 2.0
        points = np.vstack([
            -center + noise * rng.standard_normal((sizes[0], dim)),
            center + noise * rng.standard_normal((sizes[1], dim)),
        ])
        classes = np.concatenate([np.zeros(sizes[0], dtype=int), np.ones(sizes[1], dtype=int)])

        order = rng.permutation(n)
        points, classes = points[order], classes[order]

        per_class = (n_labeled // 2, n_labeled - n_labeled // 2)
        labeled = np.sort(np.concatenate([
            rng.choice(np.flatnonzero(classes == c), size=per_class[c], replace=False) for c in (0, 1)
        ]))
        unlabeled = np.setdiff1d(np.arange(n), labeled)
        self.logger.debug(f"Синтетическая задача: n={n}, разделение={separation}, шум={noise}, |L|={n_labeled}")
        return ProblemInstance(
            dataset=Dataset(points, classes),
            labeled=labeled, labels_l=classes[labeled],
            unlabeled=unlabeled, targets=classes[unlabeled],
        )


def synth_blobs(n: int, separation: float, noise: float = 1.0, seed: int = 0,
                dim: int = 2, n_labeled: Optional[int] = None) -> ProblemInstance:
    return SyntheticCollector().blobs(n, separation, noise, seed, dim, n_labeled)
