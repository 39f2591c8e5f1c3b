#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Разреженная линейная алгебра для симметричных положительно определенных систем.
Метод сопряженных градиентов с фиксированным числом итераций или допуском,
плотное прямое решение (эталон), оценка крайних собственных чисел и
расписания числа итераций CG.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from exceptions import IndefiniteMatrixError, ParameterError, SingularMatrixError, StructuralError

logger = logging.getLogger('sparse_solver')

SYMMETRY_TOLERANCE = 1e-12
PIVOT_TOLERANCE = 1e-12
# Относительная невязка, ниже которой итерации бессмысленны
MACHINE_RESIDUAL = 1e-14
# Порог признака сходимости в режиме фиксированного числа итераций
DEFAULT_CONVERGED_RESIDUAL = 1e-8


class SparseSymMatrix:
    """
    Симметричная разреженная матрица в формате CSR.
    """

    def __init__(self, matrix, check: bool = True):
        """
        Args:
            matrix: Плотная или разреженная квадратная матрица
            check: Проверять симметрию и конечность элементов
        """
        csr = sp.csr_matrix(matrix, dtype=float)
        if csr.shape[0] != csr.shape[1]:
            raise StructuralError(f"Матрица должна быть квадратной, получено {csr.shape}")
        if check:
            if not np.all(np.isfinite(csr.data)):
                raise StructuralError("Матрица содержит нечисловые элементы")
            scale = abs(csr).max() if csr.nnz else 0.0
            asym = abs(csr - csr.T).max() if csr.nnz else 0.0
            if asym > SYMMETRY_TOLERANCE * max(scale, 1e-300):
                raise StructuralError(f"Матрица несимметрична: max|A - Aᵀ| = {asym:.3e}")
        self.matrix = csr

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def __matmul__(self, x):
        return self.matrix @ x

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass
class CgReport:
    """Результат метода сопряженных градиентов"""
    solution: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool


class EigenExtremes(NamedTuple):
    """Оценки крайних собственных чисел"""
    lambda_min: float
    lambda_max: float
    converged: bool

    @property
    def condition_number(self) -> float:
        if self.lambda_min <= 0:
            return math.inf
        return self.lambda_max / self.lambda_min


def _as_operator(A):
    if isinstance(A, SparseSymMatrix):
        return A
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return SparseSymMatrix(A, check=False)
    raise StructuralError(f"Неподдерживаемый тип матрицы: {type(A).__name__}")


def cg_solve(A, b: np.ndarray, t: int, tol: Optional[float] = None) -> CgReport:
    """
    Метод сопряженных градиентов из нулевого начального приближения.

    Args:
        A: Симметричная положительно определенная матрица
        b: Правая часть длины n
        t: Максимальное число итераций
        tol: Допуск относительной невязки ‖r‖/‖b‖ (None - только бюджет t)

    Returns:
        CgReport: Приближенное решение и диагностика
    """
    A = _as_operator(A)
    b = np.asarray(b, dtype=float).ravel()
    if b.shape[0] != A.n:
        raise StructuralError(f"Размер правой части {b.shape[0]} не совпадает с размером матрицы {A.n}")
    if t < 0:
        raise ParameterError(f"Бюджет итераций должен быть неотрицательным, получено {t}")

    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs_old = float(r @ r)
    b_norm = math.sqrt(rs_old)
    if b_norm == 0.0:
        return CgReport(solution=x, iterations=0, residual_norm=0.0, converged=True)

    target = (tol if tol is not None else DEFAULT_CONVERGED_RESIDUAL) * b_norm
    stop = max(tol * b_norm if tol is not None else 0.0, MACHINE_RESIDUAL * b_norm)

    iterations = 0
    residual = b_norm
    for i in range(int(t)):
        Ap = A @ p
        curvature = float(p @ Ap)
        if curvature <= 0.0:
            raise IndefiniteMatrixError(
                f"Обнаружено направление с pᵀAp = {curvature:.3e} на итерации {i + 1}",
                iterate=x.copy(), iterations=i
            )
        alpha = rs_old / curvature
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(r @ r)
        iterations = i + 1
        residual = math.sqrt(rs_new)
        if residual <= stop:
            break
        p = r + (rs_new / rs_old) * p
        rs_old = rs_new

    return CgReport(solution=x, iterations=iterations, residual_norm=residual, converged=residual <= target)


class DenseFactorization:
    """LU-разложение плотной матрицы с проверкой ведущих элементов"""

    def __init__(self, A):
        if isinstance(A, SparseSymMatrix):
            A = A.toarray()
        elif sp.issparse(A):
            A = A.toarray()
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise StructuralError(f"Матрица должна быть квадратной, получено {A.shape}")
        self.n = A.shape[0]
        scale = float(np.max(np.abs(A))) if A.size else 0.0
        if scale == 0.0:
            raise SingularMatrixError("Нулевая матрица")
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', LinAlgWarning)
            self._lu, self._piv = lu_factor(A)
        pivot = float(np.min(np.abs(np.diag(self._lu))))
        if pivot < PIVOT_TOLERANCE * scale:
            raise SingularMatrixError(f"Матрица вырождена: минимальный ведущий элемент {pivot:.3e}")

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise StructuralError(f"Размер правой части {b.shape[0]} не совпадает с размером матрицы {self.n}")
        return lu_solve((self._lu, self._piv), b)


def direct_solve(A, b: np.ndarray) -> np.ndarray:
    """
    Прямое решение Ax = b через плотное LU-разложение.

    Args:
        A: Невырожденная матрица
        b: Правая часть

    Returns:
        np.ndarray: Решение x
    """
    return DenseFactorization(A).solve(b)


def estimate_eigen_extremes(A, iters: int = 50, seed: int = 0, tol: float = 1e-6) -> EigenExtremes:
    """
    Оценка λ_min и λ_max симметричной положительно определенной матрицы.
    λ_max - степенным методом, λ_min - обратными итерациями с CG внутри.

    Args:
        A: Симметричная положительно определенная матрица
        iters: Максимальное число итераций каждого метода
        seed: Зерно начального вектора
        tol: Относительное изменение оценки для признания сходимости

    Returns:
        EigenExtremes: Оценки и признак сходимости
    """
    A = _as_operator(A)
    rng = np.random.default_rng(seed)
    n = A.n

    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam_max = 0.0
    max_converged = False
    for _ in range(iters):
        y = A @ x
        estimate = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            break
        x = y / norm
        if abs(estimate - lam_max) <= tol * abs(estimate):
            lam_max = estimate
            max_converged = True
            break
        lam_max = estimate

    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    inverse = 0.0
    min_converged = False
    for _ in range(iters):
        y = cg_solve(A, x, t=max(10 * n, 100), tol=1e-12).solution
        estimate = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            break
        x = y / norm
        if abs(estimate - inverse) <= tol * abs(estimate):
            inverse = estimate
            min_converged = True
            break
        inverse = estimate

    lam_min = 1.0 / inverse if inverse > 0 else 0.0
    converged = max_converged and min_converged
    if not converged:
        logger.warning(
            f"Оценка собственных чисел не сошлась за {iters} итераций: "
            f"λ_min≈{lam_min:.4e}, λ_max≈{lam_max:.4e}"
        )
    return EigenExtremes(lambda_min=lam_min, lambda_max=lam_max, converged=converged)


def _clamp_budget(value: float, upper: int) -> int:
    if not math.isfinite(value):
        return upper
    return int(min(max(math.ceil(value), 1), upper))


def cg_budget_harmonic(kappa: float, n, eps: float, lambda_min: float, c: float = 1.0,
                       system_size: Optional[int] = None) -> int:
    """
    Число итераций CG для гармонической системы: ⌈c·√κ·log(n/(ε·λ_min))⌉.

    Args:
        kappa: Число обусловленности κ ≥ 1
        n: Число узлов графа
        eps: Требуемая точность ε > 0
        lambda_min: Минимальное собственное число > 0
        c: Константа расписания
        system_size: Размер системы для ограничения сверху (по умолчанию n)

    Returns:
        int: Бюджет итераций в [1, system_size]
    """
    if kappa < 1 or eps <= 0 or lambda_min <= 0 or n <= 0:
        raise ParameterError(
            f"Некорректные параметры расписания: κ={kappa}, n={n}, ε={eps}, λ_min={lambda_min}"
        )
    upper = int(system_size) if system_size is not None else max(int(math.floor(n)), 1)
    value = c * math.sqrt(kappa) * math.log(n / (eps * lambda_min))
    # Бюджет не превышает размера системы: при κ=100, n=100, ε=1e-4, λ_min=0.1
    # формула дает 162, а возвращается 100. Значение без ограничения дает
    # system_size не меньше 162
    return _clamp_budget(value, max(upper, 1))


def cg_budget_delalleau(kappa: float, lam: float, m: int, eps: float, sigma_min: float,
                        lambda_min: float, c: float = 1.0, system_size: Optional[int] = None) -> int:
    """
    Число итераций CG для системы Delalleau: ⌈c·√κ·log(λ·m/(ε·σ_min·λ_min))⌉,
    где m = |L| + |Ũ|.
    """
    if kappa < 1 or eps <= 0 or lambda_min <= 0 or lam <= 0 or sigma_min <= 0 or m <= 0:
        raise ParameterError(
            f"Некорректные параметры расписания: κ={kappa}, λ={lam}, m={m}, ε={eps}, "
            f"σ_min={sigma_min}, λ_min={lambda_min}"
        )
    upper = int(system_size) if system_size is not None else int(m)
    value = c * math.sqrt(kappa) * math.log(lam * m / (eps * sigma_min * lambda_min))
    return _clamp_budget(value, max(upper, 1))
