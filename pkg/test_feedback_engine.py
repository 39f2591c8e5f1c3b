#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль для тестирования поиска интервалов постоянства потерь.
"""

import math
import unittest

import numpy as np
from joblib import Parallel, delayed

from exceptions import ParameterError
from feedback_engine import (
    FeedbackInterval,
    IntervalBounds,
    RootSearchState,
    approx_feedback_set,
    coverage_fraction,
    enumerate_intervals,
    exact_boundaries,
    hybrid_root_step,
)
from labeling_engine import SoftLabelResult


class CurveLabeler:
    """Узлы с мягкими метками f_u(σ) = σ/(σ + c_u): f_u = 1/2 ровно при σ = c_u"""

    exact = False

    def __init__(self, roots, targets=None, degenerate=()):
        self.roots = [float(c) for c in roots]
        self.unlabeled = np.arange(len(self.roots))
        self.targets = np.ones(len(self.roots), dtype=int) if targets is None else np.asarray(targets)
        self.degenerate = set(degenerate)

    def _curve(self, u, sigma):
        c = self.roots[u]
        return sigma / (sigma + c), c / (sigma + c) ** 2

    def soft_label(self, u, sigma, eps=1e-4):
        f, df = self._curve(u, sigma)
        return SoftLabelResult(f_u=f, df_dsigma=df, iterations=0, exact=False,
                               degenerate=u in self.degenerate)

    def exact_labels(self, sigma):
        return np.array([self._curve(u, sigma)[0] for u in self.unlabeled])

    def exact_loss(self, sigma):
        return float(np.mean((self.exact_labels(sigma) >= 0.5).astype(int) != self.targets))

    def loss(self, sigma, eps=1e-4):
        return self.exact_loss(sigma)


class ConstantLabeler(CurveLabeler):
    """Один узел с постоянной мягкой меткой 0.8"""

    def __init__(self):
        super().__init__([1.0])

    def _curve(self, u, sigma):
        return 0.8, 0.0


class FlatCurveLabeler(CurveLabeler):
    """Пологие кривые f_u(σ) = 1/2 + 10⁻³·tanh(σ - c_u): градиентный шаг застревает вдали от корня"""

    def _curve(self, u, sigma):
        t = math.tanh(sigma - self.roots[u])
        return 0.5 + 1e-3 * t, 1e-3 * (1.0 - t * t)


def plateau_cliff(sigma):
    # Плато слева от σ = 3 и крутой обрыв вблизи корня
    t = math.tanh(2.0 * (sigma - 3.0))
    return 0.4 * t, 0.8 * (1.0 - t * t)


class TestHybridRootStep(unittest.TestCase):
    """Тесты для гибридного шага Ньютона/Нестерова"""

    @staticmethod
    def curve(sigma):
        # f(σ) = σ/(1+σ), корень f = 1/2 при σ = 1
        f = sigma / (1.0 + sigma)
        df = 1.0 / (1.0 + sigma) ** 2
        return (f - 0.5) ** 2, 2.0 * (f - 0.5) * df

    def test_newton_branch_converges(self):
        """Тест сходимости ветви Ньютона"""
        state = RootSearchState.start(2.0, eta=100.0)
        state = hybrid_root_step(state, *self.curve(state.sigma))
        self.assertEqual(state.branch, "newton")
        self.assertAlmostEqual(state.sigma, 0.5, places=12)
        for _ in range(30):
            state = hybrid_root_step(state, *self.curve(state.sigma))
        self.assertAlmostEqual(state.sigma, 1.0, places=8)

    def test_gradient_branch(self):
        """Тест ветви градиентного шага при малом η"""
        state = RootSearchState.start(2.0, eta=0.01)
        first = hybrid_root_step(state, *self.curve(2.0))
        self.assertEqual(first.branch, "gd")
        self.assertAlmostEqual(first.sigma, 2.0 - 0.01 / 27.0, places=12)
        self.assertAlmostEqual(first.lam, (1.0 + math.sqrt(5.0)) / 2.0, places=12)
        self.assertEqual(first.gamma, 0.0)

        second = hybrid_root_step(first, *self.curve(first.sigma))
        self.assertEqual(second.branch, "gd")
        # Ускорение уводит σ дальше промежуточной точки y
        self.assertLess(second.sigma, second.y)
        self.assertLess(second.y, first.sigma)

    def test_fast_convergence_on_smooth_curve(self):
        """Тест сходимости к σ = 1 с точностью 10⁻⁶ не более чем за 8 шагов"""
        state = RootSearchState.start(2.0, eta=10.0, eps=1e-6)
        for _ in range(8):
            state = hybrid_root_step(state, *self.curve(state.sigma))
            if state.branch == "root" or abs(state.sigma - 1.0) <= 1e-6:
                break
        self.assertLessEqual(state.n, 8)
        self.assertLessEqual(abs(state.sigma - 1.0), 1e-6)

    def test_hybrid_beats_pure_methods_on_plateau_cliff(self):
        """Тест кривой с плато и обрывом: сходится только гибридный шаг"""
        def objective(sigma):
            h, dh = plateau_cliff(sigma)
            return h * h, 2.0 * h * dh

        state = RootSearchState.start(2.2, eta=5.0, eps=1e-6)
        for _ in range(10):
            state = hybrid_root_step(state, *objective(state.sigma))
            if state.branch == "root":
                break
        self.assertAlmostEqual(state.sigma, 3.0, delta=1e-8)

        # Чистый Ньютон уходит с плато за пределы [1, 7]
        sigma = 2.2
        left_domain = False
        for _ in range(100):
            h, dh = plateau_cliff(sigma)
            if dh == 0.0:
                left_domain = True
                break
            sigma = sigma - h / dh
            if not (math.isfinite(sigma) and 1.0 <= sigma <= 7.0):
                left_domain = True
                break
        self.assertTrue(left_domain)

        # Чистый градиентный шаг с тем же η колеблется вокруг корня
        sigma = 2.2
        tail = []
        for _ in range(100):
            sigma = sigma - 5.0 * objective(sigma)[1]
            tail.append(abs(sigma - 3.0))
        self.assertGreater(max(tail[-10:]), 1e-3)

    def test_zero_objective(self):
        """Тест шага в корне"""
        state = RootSearchState.start(1.5)
        result = hybrid_root_step(state, 0.0, 0.3)
        self.assertEqual(result.branch, "root")
        self.assertEqual(result.sigma, 1.5)
        self.assertEqual(result.n, 1)

    def test_zero_derivative_keeps_sigma(self):
        """Тест нулевой производной: шаг Ньютона не определен"""
        state = RootSearchState.start(1.5)
        result = hybrid_root_step(state, 0.09, 0.0)
        self.assertEqual(result.branch, "gd")
        self.assertEqual(result.sigma, 1.5)

    def test_invalid_arguments(self):
        """Тест недопустимых аргументов"""
        with self.assertRaises(ParameterError):
            hybrid_root_step(RootSearchState.start(1.0), -1.0, 0.1)
        with self.assertRaises(ParameterError):
            hybrid_root_step(RootSearchState.start(1.0, eta=0.0), 0.1, 0.1)


class TestApproxFeedbackSet(unittest.TestCase):
    """Тесты для приближенного интервала вокруг σ₀"""

    def test_interval_between_nearest_roots(self):
        """Тест интервала между ближайшими корнями слева и справа"""
        labeler = CurveLabeler([1.0, 3.0, 5.0])
        interval = approx_feedback_set(labeler, 4.0, eps=1e-4, sigma_min=0.5, sigma_max=7.0)
        self.assertAlmostEqual(interval.sigma_l, 3.0, delta=1e-3)
        self.assertAlmostEqual(interval.sigma_h, 5.0, delta=1e-3)
        self.assertGreaterEqual(interval.converged, 2)
        self.assertTrue(interval.contains(4.0))
        self.assertEqual(interval.loss, labeler.loss(4.0))

    def test_roots_are_accurate_with_default_eta(self):
        """Тест точности границ при η = 1: отклонение не больше 10ε"""
        labeler = CurveLabeler([1.5, 2.5, 4.5, 6.0])
        interval = approx_feedback_set(labeler, 3.5, eps=1e-4, sigma_min=1.0, sigma_max=7.0)
        self.assertAlmostEqual(interval.sigma_l, 2.5, delta=1e-3)
        self.assertAlmostEqual(interval.sigma_h, 4.5, delta=1e-3)
        for root in interval.roots:
            self.assertLessEqual(min(abs(root - c) for c in labeler.roots), 1e-3)

    def test_root_without_sign_change_is_exact(self):
        """Тест корня, к которому шаги Ньютона подходят с одной стороны"""
        labeler = CurveLabeler([5.0])
        interval = approx_feedback_set(labeler, 3.0, eps=1e-4, eta=1000.0, sigma_min=1.0, sigma_max=7.0)
        self.assertEqual(interval.converged, 1)
        self.assertAlmostEqual(interval.sigma_h, 5.0, delta=1e-6)

    def test_stalled_search_recovers_root(self):
        """Тест остановки по двойному правилу вдали от корня на пологой кривой"""
        labeler = FlatCurveLabeler([3.0])
        interval = approx_feedback_set(labeler, 4.0, eps=1e-4, sigma_min=1.0, sigma_max=7.0)
        self.assertEqual(interval.converged, 1)
        self.assertEqual(interval.rejected, 0)
        self.assertAlmostEqual(interval.sigma_l, 3.0, delta=1e-3)
        self.assertEqual(interval.sigma_h, 7.0)

    def test_root_between_iterate_and_bound(self):
        """Тест корня между итерацией и пересеченной границей"""
        labeler = CurveLabeler([1.0])
        interval = approx_feedback_set(labeler, 6.0, eps=1e-4, eta=1000.0, sigma_min=0.5, sigma_max=7.0)
        self.assertEqual(interval.converged, 1)
        self.assertEqual(interval.early_exit, 0)
        self.assertAlmostEqual(interval.sigma_l, 1.0, delta=1e-4)

    def test_rejected_stationary_point(self):
        """Тест отклонения стационарной точки вдали от 1/2"""
        interval = approx_feedback_set(ConstantLabeler(), 3.0, sigma_min=1.0, sigma_max=7.0)
        self.assertEqual(interval.rejected, 1)
        self.assertEqual((interval.sigma_l, interval.sigma_h), (1.0, 7.0))

    def test_all_nodes_exhausted(self):
        """Тест вырожденного интервала при исчерпании бюджета всеми узлами"""
        labeler = CurveLabeler([3.0])
        with self.assertLogs('feedback_engine', level='WARNING'):
            interval = approx_feedback_set(labeler, 4.0, eta=1.0, sigma_min=1.0, sigma_max=7.0, max_iter=1)
        self.assertTrue(interval.all_skipped)
        self.assertEqual((interval.sigma_l, interval.sigma_h), (4.0, 4.0))

    def test_degenerate_nodes_are_skipped(self):
        """Тест пропуска вырожденных узлов"""
        labeler = CurveLabeler([2.0, 5.0], degenerate=[0])
        interval = approx_feedback_set(labeler, 3.0, eta=1000.0, sigma_min=1.0, sigma_max=7.0)
        self.assertEqual(interval.degenerate, 1)
        self.assertEqual(interval.sigma_l, 1.0)
        self.assertAlmostEqual(interval.sigma_h, 5.0, places=4)

    def test_parallel_matches_sequential(self):
        """Тест совпадения параллельного и последовательного поиска"""
        labeler = CurveLabeler([1.5, 2.5, 4.5, 6.0])
        sequential = approx_feedback_set(labeler, 3.5, eta=1000.0, sigma_min=1.0, sigma_max=7.0, workers=1)
        parallel = approx_feedback_set(labeler, 3.5, eta=1000.0, sigma_min=1.0, sigma_max=7.0, workers=2)
        self.assertAlmostEqual(sequential.sigma_l, parallel.sigma_l, places=6)
        self.assertAlmostEqual(sequential.sigma_h, parallel.sigma_h, places=6)

    def test_invalid_arguments(self):
        """Тест недопустимых аргументов"""
        labeler = CurveLabeler([3.0])
        with self.assertRaises(ParameterError):
            approx_feedback_set(labeler, 8.0, sigma_min=1.0, sigma_max=7.0)
        with self.assertRaises(ParameterError):
            approx_feedback_set(labeler, 2.0, eps=0.0)
        with self.assertRaises(ParameterError):
            approx_feedback_set(labeler, 2.0, sigma_min=3.0, sigma_max=3.0)


class TestEnumerateIntervals(unittest.TestCase):
    """Тесты для обхода диапазона σ"""

    def setUp(self):
        """Настройка тестового окружения"""
        self.labeler = CurveLabeler([3.0, 5.0])

    def test_enumeration(self):
        """Тест обхода слева направо"""
        intervals = enumerate_intervals(self.labeler, 2.0, 6.0, step=0.05, eps=1e-4)
        self.assertEqual(len(intervals), 3)
        self.assertAlmostEqual(intervals[0].sigma_h, 3.0, places=4)
        self.assertAlmostEqual(intervals[1].sigma_l, 3.0, places=4)
        self.assertAlmostEqual(intervals[1].sigma_h, 5.0, places=4)
        self.assertAlmostEqual(intervals[2].sigma_l, 5.0, places=4)
        self.assertEqual([iv.loss for iv in intervals], [1.0, 0.5, 0.0])
        self.assertAlmostEqual(coverage_fraction(intervals, 2.0, 6.0), 1.0, delta=1e-4)

    def test_query_points_increase(self):
        """Тест возрастания точек запроса"""
        intervals = enumerate_intervals(self.labeler, 2.0, 6.0, step=0.05)
        queries = [iv.sigma0 for iv in intervals]
        self.assertTrue(all(b - a >= 0.05 - 1e-12 for a, b in zip(queries, queries[1:])))
        for interval in intervals:
            self.assertTrue(interval.contains(interval.sigma0))

    def test_invalid_step(self):
        """Тест недопустимого шага"""
        with self.assertRaises(ParameterError):
            enumerate_intervals(self.labeler, 2.0, 6.0, step=0.0)

    def test_exact_boundaries(self):
        """Тест эталонных границ бисекцией"""
        boundaries = exact_boundaries(self.labeler, 2.0, 6.0, grid=50)
        np.testing.assert_allclose(boundaries, [3.0, 5.0], atol=1e-6)


class TestIntervalBounds(unittest.TestCase):
    """Тесты для общих границ [σ_l, σ_h]"""

    def test_bounds_only_shrink(self):
        """Тест монотонного сужения границ"""
        bounds = IntervalBounds(1.0, 7.0)
        bounds.raise_low(2.5)
        bounds.raise_low(2.0)
        bounds.lower_high(5.0)
        bounds.lower_high(6.0)
        self.assertEqual(bounds.snapshot(), (2.5, 5.0))

    def test_concurrent_updates(self):
        """Тест одновременных обновлений из нескольких потоков"""
        bounds = IntervalBounds(0.0, 100.0)
        values = list(np.linspace(0.0, 50.0, 101))

        def update(value):
            bounds.raise_low(value)
            bounds.lower_high(100.0 - value)
            low, high = bounds.snapshot()
            return low <= high

        results = Parallel(n_jobs=4, prefer="threads")(delayed(update)(v) for v in values)
        self.assertTrue(all(results))
        self.assertEqual(bounds.snapshot(), (50.0, 50.0))


class TestCoverage(unittest.TestCase):
    """Тесты для доли покрытия"""

    def test_partial_coverage(self):
        """Тест покрытия с промежутком"""
        intervals = [FeedbackInterval(1.0, 2.0, 1.5, 0.0), FeedbackInterval(3.0, 4.0, 3.5, 0.0)]
        self.assertAlmostEqual(coverage_fraction(intervals, 1.0, 5.0), 0.5)

    def test_overlapping_intervals(self):
        """Тест перекрывающихся интервалов"""
        intervals = [FeedbackInterval(1.0, 3.0, 2.0, 0.0), FeedbackInterval(2.0, 4.0, 3.0, 0.0),
                     FeedbackInterval(2.5, 2.5, 2.5, 0.0)]
        self.assertAlmostEqual(coverage_fraction(intervals, 1.0, 5.0), 0.75)


if __name__ == '__main__':
    unittest.main()
