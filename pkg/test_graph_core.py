#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль для тестирования графовых структур.
"""

import math
import unittest

import numpy as np

from exceptions import ParameterError, StructuralError
from graph_core import (
    Dataset,
    ProblemInstance,
    build_mutual_knn,
    build_threshold_graph,
    gaussian_weight,
    gaussian_weight_derivative,
    pairwise_distance,
)


class TestDataset(unittest.TestCase):
    """Тесты для набора данных и постановки задачи"""

    def test_dataset_shapes(self):
        """Тест размерностей набора данных"""
        dataset = Dataset(np.zeros((5, 3)), labels=[0, 1, 0, 1, 1])
        self.assertEqual(dataset.n, 5)
        self.assertEqual(dataset.dim, 3)

    def test_one_dimensional_points_become_column(self):
        """Тест преобразования одномерного массива в столбец"""
        dataset = Dataset([0.0, 1.0, 2.0])
        self.assertEqual(dataset.points.shape, (3, 1))

    def test_label_count_mismatch(self):
        """Тест несовпадения числа меток и точек"""
        with self.assertRaises(StructuralError):
            Dataset(np.zeros((4, 2)), labels=[0, 1])

    def test_empty_dataset(self):
        """Тест пустого набора данных"""
        with self.assertRaises(StructuralError):
            Dataset(np.zeros((0, 2)))

    def test_non_finite_points(self):
        """Тест нечисловых значений"""
        with self.assertRaises(StructuralError):
            Dataset([[0.0, np.nan], [1.0, 2.0]])

    def test_instance_partition(self):
        """Тест разбиения на L и U"""
        dataset = Dataset(np.arange(6, dtype=float))
        instance = ProblemInstance(dataset, [0, 3], [0, 1], [1, 2, 4, 5], [0, 0, 1, 1])
        self.assertEqual(instance.n_labeled, 2)
        self.assertEqual(instance.n_unlabeled, 4)
        self.assertEqual(instance.labels_l.dtype, float)

    def test_instance_overlap(self):
        """Тест пересечения L и U"""
        dataset = Dataset(np.arange(4, dtype=float))
        with self.assertRaises(StructuralError):
            ProblemInstance(dataset, [0, 1], [0, 1], [1, 2, 3], [0, 1, 1])

    def test_instance_must_cover_all_nodes(self):
        """Тест покрытия всех индексов"""
        dataset = Dataset(np.arange(5, dtype=float))
        with self.assertRaises(StructuralError):
            ProblemInstance(dataset, [0], [0], [1, 2], [0, 1])

    def test_instance_non_binary_labels(self):
        """Тест небинарных меток"""
        dataset = Dataset(np.arange(4, dtype=float))
        with self.assertRaises(ParameterError):
            ProblemInstance(dataset, [0, 1], [0, 2], [2, 3], [0, 1])


class TestWeights(unittest.TestCase):
    """Тесты для гауссовых весов"""

    def test_weight_values(self):
        """Тест значений веса"""
        self.assertEqual(gaussian_weight(0.0, 2.0), 1.0)
        self.assertAlmostEqual(gaussian_weight(1.0, 1.0), math.exp(-1.0), places=12)
        self.assertAlmostEqual(gaussian_weight(2.0, 1.0), math.exp(-4.0), places=12)

    def test_weight_derivative(self):
        """Тест производной веса по σ"""
        self.assertAlmostEqual(gaussian_weight_derivative(1.0, 1.0), 2.0 * math.exp(-1.0), places=12)
        self.assertEqual(gaussian_weight_derivative(0.0, 1.5), 0.0)

    def test_weight_derivative_matches_finite_difference(self):
        """Тест производной веса конечными разностями"""
        d = np.array([0.3, 1.0, 2.5])
        sigma, h = 1.7, 1e-6
        numeric = (gaussian_weight(d, sigma + h) - gaussian_weight(d, sigma - h)) / (2 * h)
        np.testing.assert_allclose(gaussian_weight_derivative(d, sigma), numeric, rtol=1e-6)

    def test_non_positive_sigma(self):
        """Тест недопустимой ширины ядра"""
        with self.assertRaises(ParameterError):
            gaussian_weight(1.0, 0.0)
        with self.assertRaises(ParameterError):
            gaussian_weight_derivative(1.0, -1.0)

    def test_pairwise_distance(self):
        """Тест евклидова расстояния"""
        dataset = Dataset([[0.0, 0.0], [3.0, 4.0]])
        self.assertEqual(pairwise_distance(dataset, 0, 1), 5.0)
        with self.assertRaises(StructuralError):
            pairwise_distance(dataset, 0, 2)


class TestMutualKnn(unittest.TestCase):
    """Тесты для взаимного kNN графа"""

    def setUp(self):
        """Настройка тестового окружения"""
        rng = np.random.default_rng(7)
        self.dataset = Dataset(rng.standard_normal((40, 3)))

    def test_mutual_edges_on_line(self):
        """Тест взаимных ребер на прямой с равными расстояниями"""
        graph = build_mutual_knn(Dataset([0.0, 1.0, 2.0, 10.0]), k=1)
        self.assertEqual(graph.edges(), {(0, 1)})
        np.testing.assert_array_equal(graph.degree_counts(), [1, 1, 0, 0])

    def test_complete_graph(self):
        """Тест полного графа при k = n - 1"""
        graph = build_mutual_knn(self.dataset, k=None)
        self.assertEqual(graph.edge_count, 40 * 39 // 2)

    def test_graph_is_symmetric(self):
        """Тест симметрии матрицы весов"""
        graph = build_mutual_knn(self.dataset, k=6)
        W = graph.weight_matrix(1.3)
        self.assertEqual(abs(W - W.T).max(), 0.0)
        self.assertEqual(W.diagonal().sum(), 0.0)
        self.assertTrue(np.all(graph.degree_counts() <= 6))

    def test_edges_are_mutual(self):
        """Тест взаимности каждого ребра"""
        k = 4
        graph = build_mutual_knn(self.dataset, k=k)
        distances = np.linalg.norm(self.dataset.points[:, None] - self.dataset.points[None], axis=2)
        np.fill_diagonal(distances, np.inf)
        nearest = np.argsort(distances, axis=1, kind='stable')[:, :k]
        for u, v in graph.edges():
            self.assertIn(v, nearest[u])
            self.assertIn(u, nearest[v])

    def test_neighbors_and_distances(self):
        """Тест списка соседей"""
        graph = build_mutual_knn(Dataset([[0.0], [1.0], [3.0]]), k=2)
        neighbors = dict(graph.neighbors(0))
        self.assertEqual(neighbors, {1: 1.0, 2: 3.0})

    def test_block_distances_match_cached(self):
        """Тест совпадения блочного и кэшированного вычисления расстояний"""
        cached = build_mutual_knn(self.dataset, k=5)
        blocked = build_mutual_knn(self.dataset, k=5, cache_cap=10)
        self.assertEqual(cached.edges(), blocked.edges())
        np.testing.assert_allclose(cached.distances, blocked.distances, atol=1e-12)
        self.assertIsNone(blocked.distance_matrix)

    def test_invalid_k(self):
        """Тест недопустимого числа соседей"""
        with self.assertRaises(ParameterError):
            build_mutual_knn(self.dataset, k=0)
        with self.assertRaises(ParameterError):
            build_mutual_knn(self.dataset, k=40)

    def test_weight_derivative_matrix(self):
        """Тест матрицы производных весов"""
        graph = build_mutual_knn(self.dataset, k=6)
        sigma, h = 2.0, 1e-6
        numeric = (graph.weight_matrix(sigma + h) - graph.weight_matrix(sigma - h)) / (2 * h)
        np.testing.assert_allclose(
            graph.weight_derivative_matrix(sigma).toarray(), numeric.toarray(), rtol=1e-5, atol=1e-10
        )


class TestThresholdGraph(unittest.TestCase):
    """Тесты для порогового графа"""

    def test_threshold_edges(self):
        """Тест отбора ребер по порогу"""
        dataset = Dataset([[0.0], [1.0], [3.0]])
        graph = build_threshold_graph(dataset, k=2, r=2.0)
        self.assertEqual(graph.edges(), {(0, 1), (1, 2)})
        self.assertEqual(graph.edge_count, 2)

    def test_threshold_weights_are_binary(self):
        """Тест бинарных весов, не зависящих от σ"""
        dataset = Dataset([[0.0], [1.0], [3.0]])
        graph = build_threshold_graph(dataset, k=2, r=5.0)
        np.testing.assert_array_equal(graph.weight_matrix(0.5).toarray(), graph.weight_matrix(3.0).toarray())
        self.assertEqual(graph.weight_matrix(1.0).max(), 1.0)
        self.assertEqual(graph.weight_derivative_matrix(1.0).nnz, 0)

    def test_threshold_monotone_in_r(self):
        """Тест монотонности числа ребер по r"""
        rng = np.random.default_rng(3)
        skeleton = build_mutual_knn(Dataset(rng.standard_normal((30, 2))), k=8)
        counts = [skeleton.threshold(r).edge_count for r in (0.2, 0.5, 1.0, 2.0, 10.0)]
        self.assertEqual(counts, sorted(counts))
        self.assertEqual(counts[-1], skeleton.edge_count)

    def test_non_positive_threshold(self):
        """Тест недопустимого порога"""
        with self.assertRaises(ParameterError):
            build_threshold_graph(Dataset([[0.0], [1.0]]), k=1, r=0.0)


if __name__ == '__main__':
    unittest.main()
