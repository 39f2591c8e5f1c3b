#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль вычисления мягких меток.
Гармоническая целевая функция и масштабируемая целевая функция Delalleau,
каждая в точной (прямое решение) и приближенной (CG) форме, вместе с
производными по σ и двойственной функцией потерь l(σ).
"""

import logging
import threading
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from exceptions import ParameterError, StructuralError
from graph_core import (Dataset, MutualKnnGraph, ProblemInstance, build_mutual_knn,
                        gaussian_weight, gaussian_weight_derivative)
from sparse_solver import (DenseFactorization, SparseSymMatrix, cg_budget_delalleau,
                           cg_budget_harmonic, cg_solve, estimate_eigen_extremes)

logger = logging.getLogger('labeling_engine')

PRIOR_LABEL = 0.5
DEFAULT_SUBSET_SIZE = 50
DEFAULT_DELALLEAU_LAMBDA = 1.4


class SolverMode(Enum):
    """Режимы решения линейных систем"""
    CG_FIXED = "cg"
    CG_TOLERANCE = "cg-tol"
    CG_SCHEDULE = "cg-budget"
    DIRECT = "direct"


@dataclass
class SoftLabelResult:
    """Мягкая метка узла и ее производная по σ"""
    f_u: float
    df_dsigma: float
    iterations: int
    exact: bool
    degenerate: bool = False
    converged: bool = True


@dataclass
class LabelBatch:
    """Мягкие метки и производные всех узлов U при фиксированном σ"""
    sigma: float
    values: np.ndarray
    derivatives: np.ndarray
    degenerate: np.ndarray
    iterations: int
    residual: float
    converged: bool
    exact: bool

    def result(self, position: int) -> SoftLabelResult:
        return SoftLabelResult(
            f_u=float(self.values[position]),
            df_dsigma=float(self.derivatives[position]),
            iterations=self.iterations,
            exact=self.exact,
            degenerate=bool(self.degenerate[position]),
            converged=self.converged,
        )


@dataclass
class HarmonicSystem:
    """
    Собранная гармоническая система при фиксированном σ.
    Строки и столбцы блоков соответствуют активным узлам U, связанным с L.
    """
    sigma: float
    weights: sp.csr_matrix
    degrees: np.ndarray
    active: np.ndarray
    p_uu: sp.csr_matrix
    p_ul: sp.csr_matrix
    dp_uu: sp.csr_matrix
    dp_ul: sp.csr_matrix
    scale: np.ndarray
    system: SparseSymMatrix

    @property
    def size(self) -> int:
        return int(self.p_uu.shape[0])

    def system_matrix(self) -> np.ndarray:
        """Плотная матрица I - P_UU (без симметризации)"""
        return np.eye(self.size) - self.p_uu.toarray()


@dataclass
class DelalleauSystem:
    """
    Система A = λΔ_L + Diag(W·1) - W на обучающем множестве L ∪ Ũ
    (первые n_labeled позиций принадлежат L).
    """
    sigma: float
    lam: float
    n_labeled: int
    weights: sp.csr_matrix
    weight_derivatives: sp.csr_matrix
    active: np.ndarray
    matrix: SparseSymMatrix
    derivative_matrix: sp.csr_matrix
    rhs: np.ndarray

    @property
    def size(self) -> int:
        return int(self.matrix.n)


def dual_loss(instance: ProblemInstance, soft_labels) -> float:
    """
    Доля ошибок округленной разметки на U.
    Метка 1 назначается при f_u ≥ 1/2.

    Args:
        instance: Постановка задачи
        soft_labels: Мягкие метки в порядке instance.unlabeled

    Returns:
        float: Потеря в [0, 1]
    """
    soft_labels = np.asarray(soft_labels, dtype=float).ravel()
    if soft_labels.shape[0] != instance.n_unlabeled:
        raise StructuralError(
            f"Ожидалось {instance.n_unlabeled} мягких меток, получено {soft_labels.shape[0]}"
        )
    predicted = (soft_labels >= PRIOR_LABEL).astype(int)
    return float(np.mean(predicted != instance.targets))


def _diag(values: np.ndarray) -> sp.csr_matrix:
    size = values.shape[0]
    return sp.diags(values, 0, shape=(size, size), format='csr')


def _components_touching(weights: sp.csr_matrix, anchors: np.ndarray) -> np.ndarray:
    """Маска узлов, компонента связности которых содержит хотя бы один якорь"""
    support = weights.copy()
    support.eliminate_zeros()
    _, component = connected_components(support, directed=False)
    touched = np.zeros(component.max() + 1, dtype=bool)
    touched[component[anchors]] = True
    return touched[component]


class SoftLabeler(ABC):
    """
    Базовый класс вычислителя мягких меток.
    Результаты решений кэшируются по (σ, ε) и безопасны для чтения из потоков.
    """

    name = "base"

    def __init__(self, instance: ProblemInstance, mode: SolverMode = SolverMode.CG_FIXED,
                 t: int = 20, tol: float = 1e-12, schedule_constant: float = 1.0,
                 anchor_sigma: Optional[float] = None, eigen_iterations: int = 50,
                 cache_size: int = 256):
        """
        Args:
            instance: Постановка задачи
            mode: Режим решателя
            t: Число итераций CG в режиме фиксированного бюджета
            tol: Допуск относительной невязки в режиме допуска
            schedule_constant: Константа c расписания итераций
            anchor_sigma: σ, при котором оценивается расписание (None - первое запрошенное σ)
            eigen_iterations: Итерации оценки собственных чисел для расписания
            cache_size: Размер кэша решений
        """
        self.instance = instance
        self.mode = SolverMode(mode)
        self.t = int(t)
        self.tol = float(tol)
        self.schedule_constant = float(schedule_constant)
        self.anchor_sigma = anchor_sigma
        self.eigen_iterations = int(eigen_iterations)
        self.cache_size = int(cache_size)
        self.logger = logging.getLogger('labeling_engine')

        self._position = {int(u): i for i, u in enumerate(instance.unlabeled)}
        self._cache = OrderedDict()
        self._lock = threading.Lock()
        self._schedule = None
        self.solve_count = 0

    @property
    def unlabeled(self) -> np.ndarray:
        return self.instance.unlabeled

    @property
    def exact(self) -> bool:
        return self.mode == SolverMode.DIRECT

    def position(self, u: int) -> int:
        """Позиция узла u в порядке instance.unlabeled"""
        try:
            return self._position[int(u)]
        except KeyError:
            raise ParameterError(f"Узел {u} не принадлежит U")

    def solve(self, sigma: float, eps: float = 1e-4) -> LabelBatch:
        """
        Мягкие метки и производные всех узлов U.

        Args:
            sigma: Ширина ядра
            eps: Точность ε (используется расписанием итераций)

        Returns:
            LabelBatch: Результат решения
        """
        if not sigma > 0:
            raise ParameterError(f"σ должно быть положительным, получено {sigma}")
        key = (float(sigma), float(eps))
        with self._lock:
            cached = self._cache.get(key)
            if cached is not None:
                self._cache.move_to_end(key)
                return cached
        batch = self._solve(float(sigma), float(eps), self.mode)
        with self._lock:
            self.solve_count += 1
            self._cache[key] = batch
            while len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return batch

    def soft_label(self, u: int, sigma: float, eps: float = 1e-4) -> SoftLabelResult:
        """Мягкая метка и производная одного неразмеченного узла"""
        position = self.position(u)
        return self.solve(sigma, eps).result(position)

    def soft_labels(self, sigma: float, eps: float = 1e-4) -> np.ndarray:
        return self.solve(sigma, eps).values

    def loss(self, sigma: float, eps: float = 1e-4) -> float:
        """Двойственная потеря l(σ) в текущем режиме решателя"""
        return dual_loss(self.instance, self.soft_labels(sigma, eps))

    def exact_solve(self, sigma: float) -> LabelBatch:
        """Решение прямым методом независимо от режима"""
        return self._solve(float(sigma), 0.0, SolverMode.DIRECT)

    def exact_labels(self, sigma: float) -> np.ndarray:
        return self.exact_solve(sigma).values

    def exact_loss(self, sigma: float) -> float:
        return dual_loss(self.instance, self.exact_labels(sigma))

    def clear_cache(self):
        with self._lock:
            self._cache.clear()

    def _iteration_budget(self, sigma: float, eps: float, mode: SolverMode, size: int) -> Optional[int]:
        if mode == SolverMode.CG_FIXED:
            return self.t
        if mode == SolverMode.CG_TOLERANCE:
            return max(10 * size, 100)
        if mode == SolverMode.CG_SCHEDULE:
            with self._lock:
                schedule = self._schedule
            if schedule is None:
                anchor = self.anchor_sigma if self.anchor_sigma is not None else sigma
                schedule = self._estimate_schedule(anchor)
                with self._lock:
                    if self._schedule is None:
                        self._schedule = schedule
                    schedule = self._schedule
            return self._schedule_budget(schedule, eps, size)
        return None

    def _cg(self, system, rhs, budget, mode):
        tol = self.tol if mode == SolverMode.CG_TOLERANCE else None
        return cg_solve(system, rhs, budget, tol=tol)

    def _check_derivative_bound(self, derivatives: np.ndarray, eps: float, sigma: float):
        # Условие |∂f/∂σ| < 1/(ε·λ_min) проверяется только при известном λ_min
        if self._schedule is None or eps <= 0:
            return
        bound = 1.0 / (eps * self._schedule.lambda_min)
        violations = int(np.sum(np.abs(derivatives) >= bound))
        if violations:
            self.logger.warning(
                f"σ={sigma:.5f}: у {violations} узлов |∂f/∂σ| ≥ 1/(ε·λ_min) = {bound:.3e}"
            )

    @abstractmethod
    def _estimate_schedule(self, sigma: float):
        """Оценка λ_min и κ системы при опорном σ"""

    @abstractmethod
    def _schedule_budget(self, schedule, eps: float, size: int) -> int:
        """Бюджет итераций по расписанию"""

    @abstractmethod
    def _solve(self, sigma: float, eps: float, mode: SolverMode) -> LabelBatch:
        """Решение системы при фиксированном σ"""


class HarmonicLabeler(SoftLabeler):
    """
    Гармоническая разметка: f_U = (I - P_UU)⁻¹ P_UL f_L, P = D⁻¹W.
    """

    name = "harmonic"

    def __init__(self, instance: ProblemInstance, graph=None, k: Optional[int] = 6, **kwargs):
        """
        Args:
            instance: Постановка задачи
            graph: Готовый скелет графа (MutualKnnGraph или ThresholdGraph)
            k: Число соседей, если граф строится здесь (None - полный граф)
            **kwargs: Параметры SoftLabeler
        """
        super().__init__(instance, **kwargs)
        if graph is None:
            graph = build_mutual_knn(instance.dataset, k if k is not None else instance.n - 1)
        if graph.n != instance.n:
            raise StructuralError(f"Граф на {graph.n} узлах не соответствует задаче на {instance.n} узлах")
        self.graph = graph

    def assemble(self, sigma: float) -> HarmonicSystem:
        """
        Сборка системы при фиксированном σ.

        Args:
            sigma: Ширина ядра

        Returns:
            HarmonicSystem: Блоки переходной матрицы, их производные и симметризованная система
        """
        instance = self.instance
        W = self.graph.weight_matrix(sigma)
        dW = self.graph.weight_derivative_matrix(sigma)
        degrees = np.asarray(W.sum(axis=1)).ravel()
        d_degrees = np.asarray(dW.sum(axis=1)).ravel()

        reachable = _components_touching(W, instance.labeled)
        active = reachable[instance.unlabeled] & (degrees[instance.unlabeled] > 0)
        rows = instance.unlabeled[active]

        inv_deg = np.zeros_like(degrees)
        positive = degrees > 0
        inv_deg[positive] = 1.0 / degrees[positive]
        W_rows = W[rows]
        dW_rows = dW[rows]
        P_rows = _diag(inv_deg[rows]) @ W_rows
        # ∂P_ij/∂σ = (∂W_ij/∂σ - P_ij·Σ_k ∂W_ik/∂σ) / Σ_k W_ik
        dP_rows = _diag(inv_deg[rows]) @ dW_rows - _diag(d_degrees[rows] * inv_deg[rows]) @ P_rows
        P_rows = sp.csr_matrix(P_rows)
        dP_rows = sp.csr_matrix(dP_rows)

        p_uu = P_rows[:, rows]
        p_ul = P_rows[:, instance.labeled]
        dp_uu = dP_rows[:, rows]
        dp_ul = dP_rows[:, instance.labeled]

        # S(I - P_UU)S⁻¹ = I - S⁻¹W_UUS⁻¹ при S = √D
        scale = np.sqrt(degrees[rows])
        inv_scale = 1.0 / scale if scale.size else scale
        normalized = _diag(inv_scale) @ W_rows[:, rows] @ _diag(inv_scale)
        normalized = (normalized + normalized.T) * 0.5
        system = SparseSymMatrix(sp.identity(rows.shape[0], format='csr') - normalized)

        return HarmonicSystem(
            sigma=sigma, weights=W, degrees=degrees, active=active,
            p_uu=p_uu, p_ul=p_ul, dp_uu=dp_uu, dp_ul=dp_ul,
            scale=scale, system=system,
        )

    def _estimate_schedule(self, sigma: float):
        system = self.assemble(sigma).system
        if system.n == 0:
            return None
        extremes = estimate_eigen_extremes(system, iters=self.eigen_iterations)
        self.logger.info(
            f"Расписание CG при σ={sigma:.4f}: λ_min={extremes.lambda_min:.4e}, "
            f"κ={extremes.condition_number:.3f}"
        )
        return extremes

    def _schedule_budget(self, schedule, eps: float, size: int) -> int:
        if schedule is None or size == 0:
            return 1
        return cg_budget_harmonic(
            max(schedule.condition_number, 1.0), self.instance.n, max(eps, 1e-300),
            schedule.lambda_min, c=self.schedule_constant, system_size=size
        )

    def _solve(self, sigma: float, eps: float, mode: SolverMode) -> LabelBatch:
        instance = self.instance
        system = self.assemble(sigma)
        values = np.full(instance.n_unlabeled, PRIOR_LABEL)
        derivatives = np.zeros(instance.n_unlabeled)
        degenerate = ~system.active
        f_l = instance.labels_l

        if system.size == 0:
            return LabelBatch(sigma, values, derivatives, degenerate, 0, 0.0, True, mode == SolverMode.DIRECT)

        rhs = system.p_ul @ f_l
        if mode == SolverMode.DIRECT:
            factor = DenseFactorization(system.system_matrix())
            f_a = factor.solve(rhs)
            d_rhs = system.dp_uu @ f_a + system.dp_ul @ f_l
            df_a = factor.solve(d_rhs)
            iterations, residual, converged = 0, 0.0, True
        else:
            budget = self._iteration_budget(sigma, eps, mode, system.size)
            s = system.scale
            label_report = self._cg(system.system, s * rhs, budget, mode)
            f_a = label_report.solution / s
            d_rhs = system.dp_uu @ f_a + system.dp_ul @ f_l
            derivative_report = self._cg(system.system, s * d_rhs, budget, mode)
            df_a = derivative_report.solution / s
            iterations = label_report.iterations + derivative_report.iterations
            residual = max(label_report.residual_norm, derivative_report.residual_norm)
            converged = label_report.converged and derivative_report.converged

        values[system.active] = f_a
        derivatives[system.active] = df_a
        if mode == SolverMode.CG_SCHEDULE:
            self._check_derivative_bound(derivatives, eps, sigma)
        return LabelBatch(sigma, values, derivatives, degenerate, iterations, residual,
                          converged, mode == SolverMode.DIRECT)


def assemble_delalleau(train_graph, n_labeled: int, lam: float, sigma: float,
                       labels_l=None) -> DelalleauSystem:
    """
    Сборка системы Delalleau на обучающем графе, первые n_labeled узлов которого размечены.

    Args:
        train_graph: Граф на L ∪ Ũ
        n_labeled: Число размеченных узлов
        lam: Вес согласия с метками λ > 0
        sigma: Ширина ядра
        labels_l: Метки L (для правой части λy)

    Returns:
        DelalleauSystem: Собранная система
    """
    if not lam > 0:
        raise ParameterError(f"λ должно быть положительным, получено {lam}")
    m = train_graph.n
    W = train_graph.weight_matrix(sigma)
    dW = train_graph.weight_derivative_matrix(sigma)
    labeled = np.arange(n_labeled)
    active = _components_touching(W, labeled)

    indicator = np.zeros(m)
    indicator[:n_labeled] = 1.0
    degrees = np.asarray(W.sum(axis=1)).ravel()
    d_degrees = np.asarray(dW.sum(axis=1)).ravel()
    A = _diag(lam * indicator + degrees) - W
    dA = sp.csr_matrix(_diag(d_degrees) - dW)

    y = np.zeros(m)
    if labels_l is not None:
        y[:n_labeled] = np.asarray(labels_l, dtype=float)

    idx = np.flatnonzero(active)
    A_active = sp.csr_matrix(A)[idx][:, idx]
    return DelalleauSystem(
        sigma=sigma, lam=lam, n_labeled=n_labeled, weights=W, weight_derivatives=dW,
        active=active, matrix=SparseSymMatrix(A_active),
        derivative_matrix=dA[idx][:, idx], rhs=lam * y[idx],
    )


class DelalleauLabeler(SoftLabeler):
    """
    Масштабируемая разметка: обучение на L ∪ Ũ и экстраполяция
    на остальные узлы U взвешенным средним по k ближайшим обучающим точкам.

    Сумма экстраполяции f̃_i = Σ_j W_ij f_j / Σ_j W_ij берется только по k
    ближайшим к i точкам из L ∪ Ũ, а не по всему обучающему множеству.
    При k=None суммирование идет по всем точкам L ∪ Ũ. Производная
    ∂f̃_i/∂σ вычисляется по тем же k соседям.
    """

    name = "delalleau"

    def __init__(self, instance: ProblemInstance, k: Optional[int] = 6,
                 subset_size: int = DEFAULT_SUBSET_SIZE, lam: float = DEFAULT_DELALLEAU_LAMBDA,
                 seed: int = 0, sigma_min: float = 1.0, subset=None, **kwargs):
        """
        Args:
            instance: Постановка задачи
            k: Число соседей обучающего графа и экстраполяции (None - все)
            subset_size: Размер подмножества Ũ
            lam: Вес согласия с метками (delalleau_lambda)
            seed: Зерно выбора Ũ
            sigma_min: Нижняя граница σ для расписания итераций
            subset: Явно заданное Ũ (индексы узлов из U)
            **kwargs: Параметры SoftLabeler
        """
        super().__init__(instance, **kwargs)
        if not lam > 0:
            raise ParameterError(f"λ должно быть положительным, получено {lam}")
        self.lam = float(lam)
        self.sigma_min = float(sigma_min)

        if subset is None:
            size = min(int(subset_size), instance.n_unlabeled)
            if size < 1:
                raise ParameterError(f"Размер Ũ должен быть положительным, получено {subset_size}")
            rng = np.random.default_rng(seed)
            subset = np.sort(rng.choice(instance.unlabeled, size=size, replace=False))
        subset = np.asarray(subset, dtype=int)
        if not np.all(np.isin(subset, instance.unlabeled)) or subset.size == 0:
            raise ParameterError("Ũ должно быть непустым подмножеством U")
        self.subset = subset

        self.train_nodes = np.concatenate([instance.labeled, subset])
        train_points = instance.dataset.points[self.train_nodes]
        m = self.train_nodes.shape[0]
        train_k = m - 1 if k is None else min(int(k), m - 1)
        self.k = train_k
        self.train_graph = build_mutual_knn(Dataset(train_points), train_k)

        train_position = {int(node): i for i, node in enumerate(self.train_nodes)}
        self._train_position = np.array([train_position.get(int(u), -1) for u in instance.unlabeled])
        test_mask = self._train_position < 0
        self._test_positions = np.flatnonzero(test_mask)
        if self._test_positions.size:
            neighbors = max(1, min(m, k if k is not None else m))
            distances = cdist(instance.dataset.points[instance.unlabeled[test_mask]], train_points)
            order = np.argsort(distances, axis=1, kind='stable')[:, :neighbors]
            self._test_neighbors = order
            self._test_distances = np.take_along_axis(distances, order, axis=1)
        else:
            self._test_neighbors = np.zeros((0, 1), dtype=int)
            self._test_distances = np.zeros((0, 1))

    def assemble(self, sigma: float) -> DelalleauSystem:
        return assemble_delalleau(self.train_graph, self.instance.n_labeled, self.lam, sigma,
                                  labels_l=self.instance.labels_l)

    def _estimate_schedule(self, sigma: float):
        extremes = estimate_eigen_extremes(self.assemble(sigma).matrix, iters=self.eigen_iterations)
        self.logger.info(
            f"Расписание CG (Delalleau) при σ={sigma:.4f}: λ_min={extremes.lambda_min:.4e}, "
            f"κ={extremes.condition_number:.3f}"
        )
        return extremes

    def _schedule_budget(self, schedule, eps: float, size: int) -> int:
        return cg_budget_delalleau(
            max(schedule.condition_number, 1.0), self.lam, self.train_nodes.shape[0],
            max(eps, 1e-300), self.sigma_min, schedule.lambda_min,
            c=self.schedule_constant, system_size=size
        )

    def train(self, sigma: float, eps: float, mode: SolverMode):
        """
        Мягкие метки и производные на обучающем множестве L ∪ Ũ.

        Returns:
            Tuple[np.ndarray, np.ndarray, np.ndarray, int, float, bool]: f, ∂f/∂σ,
            маска вырожденных узлов, итерации, невязка, признак сходимости
        """
        m = self.train_nodes.shape[0]
        f = np.full(m, PRIOR_LABEL)
        df = np.zeros(m)
        system = self.assemble(sigma)
        idx = np.flatnonzero(system.active)
        if mode == SolverMode.DIRECT:
            factor = DenseFactorization(system.matrix)
            f_a = factor.solve(system.rhs)
            df_a = -factor.solve(system.derivative_matrix @ f_a)
            iterations, residual, converged = 0, 0.0, True
        else:
            budget = self._iteration_budget(sigma, eps, mode, idx.shape[0])
            label_report = self._cg(system.matrix, system.rhs, budget, mode)
            f_a = label_report.solution
            # ∂f/∂σ = -A⁻¹(∂A/∂σ · f)
            derivative_report = self._cg(system.matrix, system.derivative_matrix @ f_a, budget, mode)
            df_a = -derivative_report.solution
            iterations = label_report.iterations + derivative_report.iterations
            residual = max(label_report.residual_norm, derivative_report.residual_norm)
            converged = label_report.converged and derivative_report.converged
        f[idx] = f_a
        df[idx] = df_a
        return f, df, ~system.active, iterations, residual, converged

    def _solve(self, sigma: float, eps: float, mode: SolverMode) -> LabelBatch:
        instance = self.instance
        f, df, train_degenerate, iterations, residual, converged = self.train(sigma, eps, mode)

        values = np.full(instance.n_unlabeled, PRIOR_LABEL)
        derivatives = np.zeros(instance.n_unlabeled)
        degenerate = np.zeros(instance.n_unlabeled, dtype=bool)

        in_train = self._train_position >= 0
        values[in_train] = f[self._train_position[in_train]]
        derivatives[in_train] = df[self._train_position[in_train]]
        degenerate[in_train] = train_degenerate[self._train_position[in_train]]

        if self._test_positions.size:
            w = gaussian_weight(self._test_distances, sigma)
            dw = gaussian_weight_derivative(self._test_distances, sigma)
            f_nb = f[self._test_neighbors]
            df_nb = df[self._test_neighbors]
            total = w.sum(axis=1)
            d_total = dw.sum(axis=1)
            ok = total > 0
            extrapolated = np.full(total.shape, PRIOR_LABEL)
            d_extrapolated = np.zeros(total.shape)
            extrapolated[ok] = (w[ok] * f_nb[ok]).sum(axis=1) / total[ok]
            # Производная частного: (Σ∂W·f + ΣW·∂f - f̃·Σ∂W) / ΣW
            d_extrapolated[ok] = (
                (dw[ok] * f_nb[ok]).sum(axis=1)
                + (w[ok] * df_nb[ok]).sum(axis=1)
                - extrapolated[ok] * d_total[ok]
            ) / total[ok]
            values[self._test_positions] = extrapolated
            derivatives[self._test_positions] = d_extrapolated
            degenerate[self._test_positions] = ~ok

        if mode == SolverMode.CG_SCHEDULE:
            self._check_derivative_bound(derivatives, eps, sigma)
        return LabelBatch(sigma, values, derivatives, degenerate, iterations, residual,
                          converged, mode == SolverMode.DIRECT)


def harmonic_exact(graph, instance: ProblemInstance, sigma: float) -> np.ndarray:
    """Точные гармонические мягкие метки всех узлов U"""
    return HarmonicLabeler(instance, graph=graph, mode=SolverMode.DIRECT).exact_labels(sigma)


def harmonic_approx(graph, instance: ProblemInstance, u: int, sigma: float, eps: float = 1e-4,
                    mode: SolverMode = SolverMode.CG_SCHEDULE, **kwargs) -> SoftLabelResult:
    """
    Приближенная гармоническая мягкая метка узла u и ее производная по σ.

    Args:
        graph: Скелет графа
        instance: Постановка задачи
        u: Неразмеченный узел
        sigma: Ширина ядра
        eps: Точность ε
        mode: Режим решателя
        **kwargs: Параметры HarmonicLabeler

    Returns:
        SoftLabelResult: Мягкая метка, производная и диагностика
    """
    labeler = HarmonicLabeler(instance, graph=graph, mode=mode, **kwargs)
    return labeler.soft_label(u, sigma, eps)


def delalleau_exact(train_graph: MutualKnnGraph, labels_l, lam: float, sigma: float) -> np.ndarray:
    """
    Точное решение f = A⁻¹λy на обучающем графе L ∪ Ũ.

    Args:
        train_graph: Граф, первые len(labels_l) узлов которого размечены
        labels_l: Метки L
        lam: Вес согласия с метками
        sigma: Ширина ядра

    Returns:
        np.ndarray: Мягкие метки всех узлов обучающего графа
    """
    labels_l = np.asarray(labels_l, dtype=float)
    system = assemble_delalleau(train_graph, labels_l.shape[0], lam, sigma, labels_l=labels_l)
    f = np.full(train_graph.n, PRIOR_LABEL)
    f[system.active] = DenseFactorization(system.matrix).solve(system.rhs)
    return f


def delalleau_approx(instance: ProblemInstance, i: int, sigma: float, eps: float = 1e-4,
                     subset_size: int = DEFAULT_SUBSET_SIZE, lam: float = DEFAULT_DELALLEAU_LAMBDA,
                     mode: SolverMode = SolverMode.CG_SCHEDULE, **kwargs) -> SoftLabelResult:
    """Приближенная мягкая метка Delalleau узла i ∈ U и ее производная по σ"""
    labeler = DelalleauLabeler(instance, subset_size=subset_size, lam=lam, mode=mode, **kwargs)
    return labeler.soft_label(i, sigma, eps)


def build_labeler(kind: str, instance: ProblemInstance, **kwargs) -> SoftLabeler:
    """
    Фабрика вычислителей мягких меток.

    Args:
        kind: 'harmonic' или 'delalleau'
        instance: Постановка задачи
        **kwargs: Параметры конструктора

    Returns:
        SoftLabeler: Вычислитель
    """
    labelers = {
        HarmonicLabeler.name: HarmonicLabeler,
        DelalleauLabeler.name: DelalleauLabeler,
    }
    if kind not in labelers:
        raise ParameterError(f"Неизвестный тип разметки: {kind}")
    return labelers[kind](instance, **kwargs)
