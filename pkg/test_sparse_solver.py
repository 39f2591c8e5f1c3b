#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль для тестирования разреженного решателя.
"""

import unittest

import numpy as np
import scipy.sparse as sp

from exceptions import IndefiniteMatrixError, ParameterError, SingularMatrixError, StructuralError
from sparse_solver import (
    DenseFactorization,
    SparseSymMatrix,
    cg_budget_delalleau,
    cg_budget_harmonic,
    cg_solve,
    direct_solve,
    estimate_eigen_extremes,
)


class TestSparseSymMatrix(unittest.TestCase):
    """Тесты для симметричной матрицы"""

    def test_asymmetric_matrix(self):
        """Тест отказа на несимметричной матрице"""
        with self.assertRaises(StructuralError):
            SparseSymMatrix([[1.0, 2.0], [0.0, 1.0]])

    def test_non_square_matrix(self):
        """Тест отказа на прямоугольной матрице"""
        with self.assertRaises(StructuralError):
            SparseSymMatrix(np.ones((2, 3)))

    def test_matvec(self):
        """Тест умножения на вектор"""
        A = SparseSymMatrix(sp.csr_matrix([[2.0, 1.0], [1.0, 3.0]]))
        np.testing.assert_allclose(A.matvec(np.array([1.0, 1.0])), [3.0, 4.0])
        np.testing.assert_allclose(A.diagonal(), [2.0, 3.0])


class TestConjugateGradient(unittest.TestCase):
    """Тесты для метода сопряженных градиентов"""

    def setUp(self):
        """Настройка тестового окружения"""
        rng = np.random.default_rng(11)
        M = rng.standard_normal((30, 30))
        self.A = M @ M.T + 30 * np.eye(30)
        self.b = rng.standard_normal(30)

    def test_two_by_two_exact(self):
        """Тест точного решения за две итерации"""
        A = SparseSymMatrix([[4.0, 1.0], [1.0, 3.0]])
        report = cg_solve(A, np.array([1.0, 2.0]), t=2)
        np.testing.assert_allclose(report.solution, [1.0 / 11.0, 7.0 / 11.0], atol=1e-12)
        self.assertTrue(report.converged)
        self.assertLessEqual(report.iterations, 2)

    def test_zero_rhs(self):
        """Тест нулевой правой части"""
        report = cg_solve(SparseSymMatrix(np.eye(3)), np.zeros(3), t=10)
        self.assertEqual(report.iterations, 0)
        np.testing.assert_array_equal(report.solution, np.zeros(3))

    def test_matches_direct_solve(self):
        """Тест совпадения с прямым решением"""
        report = cg_solve(SparseSymMatrix(self.A), self.b, t=300, tol=1e-12)
        np.testing.assert_allclose(report.solution, direct_solve(self.A, self.b), rtol=1e-8, atol=1e-10)
        self.assertTrue(report.converged)

    def test_fixed_budget_is_respected(self):
        """Тест ограничения числа итераций"""
        report = cg_solve(SparseSymMatrix(self.A), self.b, t=3)
        self.assertEqual(report.iterations, 3)

    def test_residual_decreases_with_budget(self):
        """Тест уменьшения невязки с ростом бюджета"""
        residuals = [cg_solve(SparseSymMatrix(self.A), self.b, t=t).residual_norm for t in (1, 5, 20)]
        self.assertGreater(residuals[0], residuals[1])
        self.assertGreater(residuals[1], residuals[2])

    def test_indefinite_matrix(self):
        """Тест обнаружения неположительной кривизны"""
        with self.assertRaises(IndefiniteMatrixError) as context:
            cg_solve(SparseSymMatrix(np.diag([1.0, -1.0])), np.array([0.0, 1.0]), t=5)
        self.assertEqual(context.exception.iterations, 0)
        np.testing.assert_array_equal(context.exception.iterate, np.zeros(2))

    def test_dimension_mismatch(self):
        """Тест несовпадения размерностей"""
        with self.assertRaises(StructuralError):
            cg_solve(SparseSymMatrix(np.eye(3)), np.ones(2), t=5)


class TestDirectSolve(unittest.TestCase):
    """Тесты для прямого решения"""

    def test_singular_matrix(self):
        """Тест вырожденной матрицы"""
        with self.assertRaises(SingularMatrixError):
            direct_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2))

    def test_zero_matrix(self):
        """Тест нулевой матрицы"""
        with self.assertRaises(SingularMatrixError):
            DenseFactorization(np.zeros((3, 3)))

    def test_factorization_reuse(self):
        """Тест повторного использования разложения"""
        A = np.array([[4.0, 1.0], [1.0, 3.0]])
        factor = DenseFactorization(sp.csr_matrix(A))
        for b in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
            np.testing.assert_allclose(A @ factor.solve(b), b, atol=1e-12)


class TestEigenAndBudgets(unittest.TestCase):
    """Тесты для оценки собственных чисел и расписаний"""

    def test_eigen_extremes_of_diagonal(self):
        """Тест оценки крайних собственных чисел диагональной матрицы"""
        A = SparseSymMatrix(sp.diags(np.arange(1.0, 11.0)))
        extremes = estimate_eigen_extremes(A, iters=500)
        self.assertAlmostEqual(extremes.lambda_min, 1.0, places=3)
        self.assertAlmostEqual(extremes.lambda_max, 10.0, places=3)
        self.assertAlmostEqual(extremes.condition_number, 10.0, places=2)

    def test_harmonic_budget(self):
        """Тест расписания для гармонической системы"""
        # ⌈2·log(100/0.01)⌉ = ⌈18.42⌉
        self.assertEqual(cg_budget_harmonic(4.0, 100, 1e-2, 1.0), 19)

    def test_harmonic_budget_is_clamped(self):
        """Тест ограничения бюджета размером системы"""
        self.assertEqual(cg_budget_harmonic(1e6, 10, 1e-6, 1e-3), 10)
        self.assertEqual(cg_budget_harmonic(1e6, 100, 1e-6, 1e-3, system_size=40), 40)
        self.assertEqual(cg_budget_harmonic(1.0, 100, 1e3, 1.0), 1)

    def test_harmonic_budget_clamped_to_system_size(self):
        """Тест: формула дает 162 итерации, но CG на n=100 не делает больше n шагов"""
        # ⌈10·log(10^7)⌉ = ⌈161.18⌉
        self.assertEqual(cg_budget_harmonic(100.0, 100, 1e-4, 0.1, system_size=1000), 162)
        self.assertEqual(cg_budget_harmonic(100.0, 100, 1e-4, 0.1), 100)

    def test_delalleau_budget(self):
        """Тест расписания для системы Delalleau"""
        # ⌈2·log(1.4·60/(1e-3·1·0.5))⌉ = ⌈24.06⌉
        self.assertEqual(cg_budget_delalleau(4.0, 1.4, 60, 1e-3, 1.0, 0.5), 25)

    def test_invalid_budget_parameters(self):
        """Тест недопустимых параметров расписания"""
        with self.assertRaises(ParameterError):
            cg_budget_harmonic(0.5, 100, 1e-2, 1.0)
        with self.assertRaises(ParameterError):
            cg_budget_harmonic(4.0, 100, 0.0, 1.0)
        with self.assertRaises(ParameterError):
            cg_budget_delalleau(4.0, 0.0, 60, 1e-3, 1.0, 0.5)


if __name__ == '__main__':
    unittest.main()
