#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Ядро графовых структур.
Наборы данных, постановка полуконтролируемой задачи, метрика расстояний
и параметрические семейства графов: взаимный kNN с гауссовыми весами
и пороговый kNN граф с бинарными весами.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist, pdist, squareform

from config import DISTANCE_CACHE_CAP
from exceptions import ParameterError, StructuralError

logger = logging.getLogger('graph_core')

# Размер блока строк при вычислении расстояний без полного кэша
_ROW_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class Dataset:
    """Набор векторов признаков (после PCA) с необязательными метками классов"""
    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        try:
            points = np.asarray(self.points, dtype=float)
        except (TypeError, ValueError) as e:
            raise StructuralError(f"Векторы признаков имеют разную длину: {e}")
        if points.ndim == 1 and points.size:
            points = points.reshape(-1, 1)
        if points.ndim != 2:
            raise StructuralError(f"Ожидался двумерный массив точек, получено измерений: {points.ndim}")
        if points.shape[0] == 0 or points.shape[1] == 0:
            raise StructuralError("Набор данных пуст")
        if not np.all(np.isfinite(points)):
            raise StructuralError("Набор данных содержит нечисловые значения")
        object.__setattr__(self, 'points', points)

        if self.labels is not None:
            labels = np.asarray(self.labels).astype(int).ravel()
            if labels.shape[0] != points.shape[0]:
                raise StructuralError(
                    f"Число меток ({labels.shape[0]}) не совпадает с числом точек ({points.shape[0]})"
                )
            object.__setattr__(self, 'labels', labels)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, indices) -> 'Dataset':
        """Поднабор точек в заданном порядке"""
        indices = np.asarray(indices, dtype=int)
        labels = None if self.labels is None else self.labels[indices]
        return Dataset(self.points[indices], labels)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """
    Постановка задачи: размеченное множество L с бинарными метками и
    неразмеченное множество U с целевыми метками τ (только для оценки).
    """
    dataset: Dataset
    labeled: np.ndarray
    labels_l: np.ndarray
    unlabeled: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        labeled = np.asarray(self.labeled, dtype=int).ravel()
        unlabeled = np.asarray(self.unlabeled, dtype=int).ravel()
        labels_l = np.asarray(self.labels_l).ravel()
        targets = np.asarray(self.targets).ravel()

        if labeled.size == 0 or unlabeled.size == 0:
            raise StructuralError("Множества L и U должны быть непустыми")
        if labels_l.shape[0] != labeled.shape[0]:
            raise StructuralError("Число меток L не совпадает с размером L")
        if targets.shape[0] != unlabeled.shape[0]:
            raise StructuralError("Число целевых меток не совпадает с размером U")
        if np.intersect1d(labeled, unlabeled).size:
            raise StructuralError("Множества L и U пересекаются")
        covered = np.sort(np.concatenate([labeled, unlabeled]))
        if covered.size != self.dataset.n or not np.array_equal(covered, np.arange(self.dataset.n)):
            raise StructuralError("L ∪ U должно покрывать ровно все индексы набора данных")
        for name, values in (('L', labels_l), ('U', targets)):
            if not np.all(np.isin(values, (0, 1))):
                raise ParameterError(f"Метки множества {name} должны быть из {{0, 1}}")

        object.__setattr__(self, 'labeled', labeled)
        object.__setattr__(self, 'unlabeled', unlabeled)
        object.__setattr__(self, 'labels_l', labels_l.astype(float))
        object.__setattr__(self, 'targets', targets.astype(int))

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def n_labeled(self) -> int:
        return self.labeled.shape[0]

    @property
    def n_unlabeled(self) -> int:
        return self.unlabeled.shape[0]


def pairwise_distance(dataset: Dataset, u: int, v: int) -> float:
    """
    Евклидово расстояние между точками u и v.

    Args:
        dataset: Набор данных
        u: Индекс первой точки
        v: Индекс второй точки

    Returns:
        float: Неотрицательное расстояние
    """
    for index in (u, v):
        if not 0 <= int(index) < dataset.n:
            raise StructuralError(f"Индекс {index} вне диапазона [0, {dataset.n})")
    diff = dataset.points[int(u)] - dataset.points[int(v)]
    return float(np.sqrt(np.dot(diff, diff)))


def gaussian_weight(d, sigma: float):
    """
    Гауссов вес exp(-d²/σ²).

    Args:
        d: Расстояние (скаляр или массив)
        sigma: Ширина ядра σ > 0

    Returns:
        Вес в (0, 1] той же формы, что и d
    """
    if not sigma > 0:
        raise ParameterError(f"σ должно быть положительным, получено {sigma}")
    d = np.asarray(d, dtype=float)
    w = np.exp(-(d * d) / (sigma * sigma))
    return float(w) if w.ndim == 0 else w


def gaussian_weight_derivative(d, sigma: float):
    """
    Производная гауссова веса по σ: 2·w·d²/σ³.

    Args:
        d: Расстояние (скаляр или массив)
        sigma: Ширина ядра σ > 0

    Returns:
        Неотрицательная производная той же формы, что и d
    """
    if not sigma > 0:
        raise ParameterError(f"σ должно быть положительным, получено {sigma}")
    d = np.asarray(d, dtype=float)
    d2 = d * d
    dw = 2.0 * np.exp(-d2 / (sigma * sigma)) * d2 / sigma ** 3
    return float(dw) if dw.ndim == 0 else dw


@dataclass(frozen=True, eq=False)
class MutualKnnGraph:
    """
    Скелет взаимного kNN графа, не зависящий от σ.
    Каждое ребро хранится в обоих направлениях вместе с расстоянием.
    """
    n: int
    k: int
    rows: np.ndarray
    cols: np.ndarray
    distances: np.ndarray
    distance_matrix: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def edge_count(self) -> int:
        """Число неориентированных ребер"""
        return self.rows.shape[0] // 2

    def neighbors(self, u: int) -> List[Tuple[int, float]]:
        """Список (сосед, расстояние) для узла u"""
        mask = self.rows == u
        return [(int(v), float(d)) for v, d in zip(self.cols[mask], self.distances[mask])]

    def degree_counts(self) -> np.ndarray:
        """Число соседей каждого узла"""
        return np.bincount(self.rows, minlength=self.n)

    def edges(self) -> set:
        """Множество неориентированных ребер (u, v) с u < v"""
        return {(int(u), int(v)) for u, v in zip(self.rows, self.cols) if u < v}

    def weight_matrix(self, sigma: float) -> sp.csr_matrix:
        """Разреженная матрица гауссовых весов W(σ)"""
        values = gaussian_weight(self.distances, sigma)
        return self._assemble(values)

    def weight_derivative_matrix(self, sigma: float) -> sp.csr_matrix:
        """Разреженная матрица ∂W/∂σ"""
        values = gaussian_weight_derivative(self.distances, sigma)
        return self._assemble(values)

    def adjacency(self) -> sp.csr_matrix:
        """Бинарная матрица смежности"""
        return self._assemble(np.ones_like(self.distances))

    def threshold(self, r: float) -> 'ThresholdGraph':
        """Пороговый граф G(k, r) на том же скелете"""
        if not r > 0:
            raise ParameterError(f"Порог r должен быть положительным, получено {r}")
        keep = self.distances <= r
        return ThresholdGraph(
            n=self.n, k=self.k, r=float(r),
            rows=self.rows[keep], cols=self.cols[keep], distances=self.distances[keep]
        )

    def _assemble(self, values: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix(
            (np.asarray(values, dtype=float), (self.rows, self.cols)),
            shape=(self.n, self.n)
        )


@dataclass(frozen=True, eq=False)
class ThresholdGraph:
    """Невзвешенный граф: ребро есть, если d(u,v) ≤ r и (u,v) во взаимном kNN"""
    n: int
    k: int
    r: float
    rows: np.ndarray
    cols: np.ndarray
    distances: np.ndarray

    @property
    def edge_count(self) -> int:
        return self.rows.shape[0] // 2

    def edges(self) -> set:
        return {(int(u), int(v)) for u, v in zip(self.rows, self.cols) if u < v}

    def neighbors(self, u: int) -> List[Tuple[int, float]]:
        mask = self.rows == u
        return [(int(v), float(d)) for v, d in zip(self.cols[mask], self.distances[mask])]

    def weight_matrix(self, sigma: float = None) -> sp.csr_matrix:
        # Веса не зависят от σ
        return sp.csr_matrix(
            (np.ones(self.rows.shape[0]), (self.rows, self.cols)), shape=(self.n, self.n)
        )

    def weight_derivative_matrix(self, sigma: float = None) -> sp.csr_matrix:
        return sp.csr_matrix((self.n, self.n))


def knn_lists(points: np.ndarray, k: int, cache_cap: int = DISTANCE_CACHE_CAP):
    """
    Списки k ближайших соседей каждой точки.
    При равенстве расстояний предпочтение отдается меньшему индексу.

    Args:
        points: Массив точек n×dim
        k: Число соседей
        cache_cap: Максимальный n, при котором хранится полная матрица расстояний

    Returns:
        Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]: индексы соседей n×k,
        расстояния n×k и полная матрица расстояний (или None)
    """
    n = points.shape[0]
    full = None
    if n <= cache_cap:
        full = squareform(pdist(points, metric='euclidean'))
        blocks = [(0, n, full.copy())]
    else:
        blocks = (
            (start, min(start + _ROW_BLOCK, n), cdist(points[start:start + _ROW_BLOCK], points))
            for start in range(0, n, _ROW_BLOCK)
        )

    neighbor_idx = np.empty((n, k), dtype=int)
    neighbor_dist = np.empty((n, k), dtype=float)
    for start, stop, block in blocks:
        block[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(block, axis=1, kind='stable')[:, :k]
        neighbor_idx[start:stop] = order
        neighbor_dist[start:stop] = np.take_along_axis(block, order, axis=1)
    return neighbor_idx, neighbor_dist, full


def build_mutual_knn(dataset: Dataset, k: int, cache_cap: int = DISTANCE_CACHE_CAP) -> MutualKnnGraph:
    """
    Построение взаимного kNN графа: ребро (u,v) есть, если u среди k ближайших
    к v и v среди k ближайших к u.

    Args:
        dataset: Набор данных
        k: Число соседей (k = n-1 дает полный граф)
        cache_cap: Порог кэширования полной матрицы расстояний

    Returns:
        MutualKnnGraph: Скелет графа
    """
    n = dataset.n
    if k is None:
        k = n - 1
    k = int(k)
    if k < 1 or k >= n:
        raise ParameterError(f"Требуется 1 ≤ k < n, получено k={k}, n={n}")

    neighbor_idx, neighbor_dist, full = knn_lists(dataset.points, k, cache_cap)

    rows = np.repeat(np.arange(n), k)
    directed = sp.csr_matrix((np.ones(n * k), (rows, neighbor_idx.ravel())), shape=(n, n))
    mutual = directed.multiply(directed.T).tocoo()
    order = np.lexsort((mutual.col, mutual.row))
    edge_rows = mutual.row[order].astype(int)
    edge_cols = mutual.col[order].astype(int)

    if full is not None:
        edge_dist = full[edge_rows, edge_cols]
    else:
        diff = dataset.points[edge_rows] - dataset.points[edge_cols]
        edge_dist = np.sqrt(np.einsum('ij,ij->i', diff, diff))

    graph = MutualKnnGraph(
        n=n, k=k, rows=edge_rows, cols=edge_cols, distances=edge_dist,
        distance_matrix=full
    )
    isolated = int(np.sum(graph.degree_counts() == 0))
    logger.info(f"Построен взаимный kNN граф: n={n}, k={k}, ребер={graph.edge_count}, изолированных узлов={isolated}")
    return graph


def build_threshold_graph(dataset: Dataset, k: int, r: float,
                          cache_cap: int = DISTANCE_CACHE_CAP) -> ThresholdGraph:
    """
    Построение порогового kNN графа G(k, r).

    Args:
        dataset: Набор данных
        k: Число соседей
        r: Порог расстояния r > 0

    Returns:
        ThresholdGraph: Невзвешенный граф
    """
    if not r > 0:
        raise ParameterError(f"Порог r должен быть положительным, получено {r}")
    return build_mutual_knn(dataset, k, cache_cap).threshold(r)
