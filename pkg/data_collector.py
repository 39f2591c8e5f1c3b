#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль сбора данных для экспериментов.
Загружает наборы изображений (IDX), таблицы (CSV) и синтетические облака,
выполняет PCA и формирует бинарные задачи полуконтролируемой классификации.
"""

import logging
import threading
from typing import Dict, Optional, Tuple

import numpy as np
from sklearn.decomposition import PCA

from exceptions import ConfigError, DataError, ParameterError
from graph_core import Dataset, ProblemInstance
from src.data_sources.csv_collector import CsvCollector
from src.data_sources.idx_collector import IdxCollector
from src.data_sources.synthetic_collector import SyntheticCollector

logger = logging.getLogger('data_collector')

IDX_SOURCES = ("mnist", "fashion")
CSV_SOURCES = ("usps", "csv")


def pca_project(dataset: Dataset, components: int) -> Dataset:
    """
    Проекция на первые главные компоненты.
    Направления упорядочены по убыванию дисперсии; знак каждого направления
    выбран так, что его наибольшая по модулю координата положительна.

    Args:
        dataset: Набор данных
        components: Число компонент (1 ≤ components ≤ min(dim, n))

    Returns:
        Dataset: Центрированные проекции с теми же метками
    """
    components = int(components)
    if components < 1 or components > dataset.dim or components > dataset.n:
        raise ParameterError(
            f"Число компонент должно быть в [1, min(dim={dataset.dim}, n={dataset.n})], получено {components}"
        )
    pca = PCA(n_components=components, svd_solver='full')
    projected = pca.fit_transform(dataset.points)

    directions = pca.components_
    pivots = np.argmax(np.abs(directions), axis=1)
    signs = np.sign(directions[np.arange(components), pivots])
    signs[signs == 0] = 1.0
    projected = projected * signs

    logger.info(
        f"PCA: {dataset.dim} → {components} компонент, "
        f"объясненная дисперсия {float(np.sum(pca.explained_variance_ratio_)):.4f}"
    )
    return Dataset(projected, dataset.labels)


def make_binary_task(dataset: Dataset, class_a: int, class_b: int, n: int,
                     n_labeled: int, seed: int = 0) -> ProblemInstance:
    """
    Случайная сбалансированная бинарная задача.

    Args:
        dataset: Набор данных с метками классов
        class_a: Класс, получающий метку 0
        class_b: Класс, получающий метку 1
        n: Размер подвыборки
        n_labeled: Размер L (поровну из каждого класса)
        seed: Зерно генератора

    Returns:
        ProblemInstance: Задача на n точках
    """
    if dataset.labels is None:
        raise DataError("Набор данных не содержит меток классов")
    if class_a == class_b:
        raise ParameterError(f"Классы должны различаться, получено {class_a} и {class_b}")
    if n < 4:
        raise ParameterError(f"Требуется n ≥ 4, получено {n}")
    if not 2 <= n_labeled < n:
        raise ParameterError(f"Требуется 2 ≤ |L| < n, получено |L|={n_labeled}, n={n}")

    sizes = (n // 2, n - n // 2)
    labeled_sizes = (n_labeled // 2, n_labeled - n_labeled // 2)
    rng = np.random.default_rng(seed)

    picked = []
    for cls, size in zip((class_a, class_b), sizes):
        pool = np.flatnonzero(dataset.labels == cls)
        if pool.shape[0] < size:
            raise DataError(f"Недостаточно примеров класса {cls}: нужно {size}, доступно {pool.shape[0]}")
        picked.append(rng.choice(pool, size=size, replace=False))

    binary = np.concatenate([np.zeros(sizes[0], dtype=int), np.ones(sizes[1], dtype=int)])
    order = rng.permutation(n)
    indices = np.concatenate(picked)[order]
    binary = binary[order]

    labeled = np.sort(np.concatenate([
        rng.choice(np.flatnonzero(binary == c), size=labeled_sizes[c], replace=False) for c in (0, 1)
    ]))
    unlabeled = np.setdiff1d(np.arange(n), labeled)
    subset = Dataset(dataset.points[indices], binary)
    logger.debug(f"Бинарная задача {class_a}/{class_b}: n={n}, |L|={n_labeled}, зерно={seed}")
    return ProblemInstance(
        dataset=subset, labeled=labeled, labels_l=binary[labeled],
        unlabeled=unlabeled, targets=binary[unlabeled],
    )


class DataCollector:
    """
    Класс для получения наборов данных и задач по конфигурации эксперимента.
    """

    def __init__(self):
        """Инициализация сборщика данных"""
        self.idx_collector = IdxCollector()
        self.csv_collector = CsvCollector()
        self.synthetic_collector = SyntheticCollector()
        self.logger = logging.getLogger('data_collector')
        self._pools: Dict[Tuple, Dataset] = {}
        self._lock = threading.Lock()

    def load_dataset(self, config) -> Dataset:
        """
        Загрузка набора данных источника, отбор пары классов и PCA.
        Результат кэшируется для повторных подвыборок.

        Args:
            config: Конфигурация эксперимента

        Returns:
            Dataset: Пул точек двух классов после PCA
        """
        key = (config.source, config.images_path, config.labels_path, config.csv_path,
               config.class_a, config.class_b, config.pca_components)
        with self._lock:
            if key in self._pools:
                return self._pools[key]

        if config.source in IDX_SOURCES:
            if not config.images_path or not config.labels_path:
                raise ConfigError(f"Для источника {config.source} нужны images_path и labels_path")
            dataset = self.idx_collector.load(config.images_path, config.labels_path)
        elif config.source in CSV_SOURCES:
            if not config.csv_path:
                raise ConfigError(f"Для источника {config.source} нужен csv_path")
            dataset = self.csv_collector.load(config.csv_path)
        else:
            raise ConfigError(f"Источник {config.source} не загружается из файла")

        mask = np.isin(dataset.labels, (config.class_a, config.class_b))
        if not np.any(mask):
            raise DataError(f"В наборе нет примеров классов {config.class_a} и {config.class_b}")
        pool = dataset.subset(np.flatnonzero(mask))
        if config.pca_components and config.pca_components < pool.dim:
            pool = pca_project(pool, config.pca_components)

        with self._lock:
            self._pools[key] = pool
        return pool

    def build_instance(self, config, seed: Optional[int] = None) -> ProblemInstance:
        """
        Задача для одной подвыборки эксперимента.

        Args:
            config: Конфигурация эксперимента
            seed: Зерно подвыборки (по умолчанию config.seed)

        Returns:
            ProblemInstance: Бинарная задача
        """
        seed = config.seed if seed is None else int(seed)
        if config.source == "synthetic":
            return self.synthetic_collector.blobs(
                config.n, config.separation, noise=config.noise, seed=seed,
                dim=config.dim, n_labeled=config.labeled_size()
            )
        pool = self.load_dataset(config)
        return make_binary_task(pool, config.class_a, config.class_b, config.n,
                                config.labeled_size(), seed=seed)
