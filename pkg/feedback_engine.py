#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль обратной связи.
Поиск приближенных интервалов постоянства потерь l(σ) вокруг заданного σ₀
гибридным методом Ньютона/Нестерова для g_u(σ) = (f_u(σ) - 1/2)² и
последовательный обход всего диапазона [σ_min, σ_max].
"""

import logging
import math
import threading
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import brentq

from config import worker_count
from exceptions import ParameterError
from labeling_engine import PRIOR_LABEL, SoftLabeler

logger = logging.getLogger('feedback_engine')

DERIVATIVE_GUARD = 1e-12
MAX_ROOT_ITERATIONS = 100
ROOT_TOLERANCE = 1e-4
POLISH_TOLERANCE = 0.1
MAX_POLISH_ITERATIONS = 100

DEFAULT_STEP = 0.05
DEFAULT_EPS = 1e-4
DEFAULT_ETA = 1.0


@dataclass(frozen=True)
class RootSearchState:
    """Состояние гибридного поиска корня"""
    sigma: float
    y: float
    n: int = 0
    lam: float = 1.0
    gamma: float = 0.0
    eta: float = DEFAULT_ETA
    eps: float = DEFAULT_EPS
    branch: str = "start"

    @classmethod
    def start(cls, sigma0: float, eta: float = DEFAULT_ETA, eps: float = DEFAULT_EPS) -> 'RootSearchState':
        return cls(sigma=float(sigma0), y=float(sigma0), eta=eta, eps=eps)


def hybrid_root_step(state: RootSearchState, g: float, g_prime: float) -> RootSearchState:
    """
    Один шаг гибридного метода: из шага градиентного спуска ηg' и шага
    Ньютона 2g/g' выбирается меньший по модулю. Градиентный шаг
    ускоряется по Нестерову.

    Args:
        state: Текущее состояние
        g: Значение g(σ_n) ≥ 0
        g_prime: Производная g'(σ_n)

    Returns:
        RootSearchState: Новое состояние
    """
    if not state.eta > 0:
        raise ParameterError(f"Скорость обучения η должна быть положительной, получено {state.eta}")
    if g < 0:
        raise ParameterError(f"g должно быть неотрицательным, получено {g}")
    if g == 0:
        return replace(state, n=state.n + 1, y=state.sigma, branch="root")

    xi_gd = state.eta * g_prime
    xi_newton = 2.0 * g / g_prime if abs(g_prime) >= DERIVATIVE_GUARD else math.inf

    if abs(xi_newton) <= abs(xi_gd):
        y_next = state.sigma - xi_newton
        return replace(state, n=state.n + 1, sigma=y_next, y=y_next, branch="newton")

    y_next = state.sigma - xi_gd
    lam_next = (1.0 + math.sqrt(1.0 + 4.0 * state.lam ** 2)) / 2.0
    gamma = (1.0 - state.lam) / lam_next
    sigma_next = (1.0 - gamma) * y_next + gamma * state.y
    return replace(state, n=state.n + 1, sigma=sigma_next, y=y_next,
                   lam=lam_next, gamma=gamma, branch="gd")


class IntervalBounds:
    """
    Общие для всех узлов текущие границы [σ_l, σ_h].
    Границы только сужаются, поэтому устаревшее чтение безопасно.
    """

    def __init__(self, low: float, high: float):
        self.low = float(low)
        self.high = float(high)
        self._lock = threading.Lock()

    def snapshot(self):
        with self._lock:
            return self.low, self.high

    def raise_low(self, value: float):
        with self._lock:
            self.low = max(self.low, value)

    def lower_high(self, value: float):
        with self._lock:
            self.high = min(self.high, value)


@dataclass
class NodeRootOutcome:
    """Итог поиска корня для одного узла"""
    node: int
    status: str
    root: Optional[float] = None
    iterations: int = 0


@dataclass
class FeedbackInterval:
    """Приближенный интервал постоянства потерь, содержащий σ₀"""
    sigma_l: float
    sigma_h: float
    sigma0: float
    loss: float
    exact: bool = False
    converged: int = 0
    rejected: int = 0
    early_exit: int = 0
    exhausted: int = 0
    degenerate: int = 0
    all_skipped: bool = False
    roots: List[float] = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.sigma_h - self.sigma_l

    def contains(self, sigma: float, slack: float = 0.0) -> bool:
        return self.sigma_l - slack <= sigma <= self.sigma_h + slack


def _root_gap(labeler: SoftLabeler, u: int, sigma: float, eps: float) -> float:
    return labeler.soft_label(u, sigma, eps).f_u - PRIOR_LABEL


def _polish_root(labeler: SoftLabeler, u: int, a: float, h_a: float, b: float, h_b: float,
                 eps: float) -> float:
    """Уточнение корня f_u = 1/2 методом Брента на отрезке со сменой знака"""
    if h_a == 0:
        return a
    if h_b == 0:
        return b
    lo, hi = min(a, b), max(a, b)
    return float(brentq(lambda s: _root_gap(labeler, u, s, eps), lo, hi,
                        xtol=POLISH_TOLERANCE * eps, maxiter=MAX_POLISH_ITERATIONS))


def _close_at_edge(labeler: SoftLabeler, u: int, sigma: float, h: float, edge: float, eps: float,
                   iteration: int) -> NodeRootOutcome:
    # Итерация покинула [σ_l, σ_h]: корень внутри остается только при смене знака на границе
    if edge != sigma:
        h_edge = _root_gap(labeler, u, edge, eps)
        if h * h_edge <= 0:
            root = _polish_root(labeler, u, sigma, h, edge, h_edge, eps)
            return NodeRootOutcome(node=u, status="converged", root=root, iterations=iteration)
    return NodeRootOutcome(node=u, status="early_exit", iterations=iteration)


def _recover_stalled(labeler: SoftLabeler, u: int, sigma: float, f: float, df: float, eps: float,
                     bounds: IntervalBounds, iteration: int, max_iter: int,
                     root_tol: float) -> NodeRootOutcome:
    """
    Продолжение поиска шагами Ньютона для f_u - 1/2 после остановки
    по двойному правилу вдали от корня. Без смены знака корень принимается,
    когда |f_u - 1/2| ≤ root_tol и шаг Ньютона не превышает ε.
    """
    h = f - PRIOR_LABEL
    while iteration < max_iter:
        if abs(df) < DERIVATIVE_GUARD:
            break
        step = h / df
        sigma_new = sigma - step
        if abs(h) <= root_tol and abs(step) <= eps:
            return NodeRootOutcome(node=u, status="converged", root=sigma_new, iterations=iteration)
        iteration += 1
        low, high = bounds.snapshot()
        if not math.isfinite(sigma_new):
            return NodeRootOutcome(node=u, status="early_exit", iterations=iteration)
        if sigma_new < low or sigma_new > high:
            edge = low if sigma_new < low else high
            return _close_at_edge(labeler, u, sigma, h, edge, eps, iteration)
        result = labeler.soft_label(u, sigma_new, eps)
        h_new = result.f_u - PRIOR_LABEL
        if h * h_new <= 0:
            root = _polish_root(labeler, u, sigma, h, sigma_new, h_new, eps)
            return NodeRootOutcome(node=u, status="converged", root=root, iterations=iteration)
        sigma, h, df = sigma_new, h_new, result.df_dsigma
    return NodeRootOutcome(node=u, status="rejected", root=sigma, iterations=iteration)


def _search_node_root(labeler: SoftLabeler, u: int, sigma0: float, eps: float, eta: float,
                      bounds: IntervalBounds, max_iter: int, root_tol: float) -> NodeRootOutcome:
    """
    Поиск корня f_u(σ) = 1/2 из σ₀ гибридными шагами.

    Смена знака f_u - 1/2 между соседними итерациями или между итерацией и
    границей [σ_l, σ_h] дает отрезок, на котором корень уточняется методом
    Брента. Без смены знака корень принимается только при |f_u - 1/2| ≤ root_tol
    и шаге Ньютона не больше ε.
    """
    first = labeler.soft_label(u, sigma0, eps)
    if first.degenerate:
        return NodeRootOutcome(node=u, status="degenerate")

    state = RootSearchState.start(sigma0, eta=eta, eps=eps)
    f = first.f_u
    df = first.df_dsigma
    for iteration in range(1, max_iter + 1):
        h = f - PRIOR_LABEL
        g = h ** 2
        g_prime = 2.0 * h * df
        new_state = hybrid_root_step(state, g, g_prime)
        if new_state.branch == "root":
            return NodeRootOutcome(node=u, status="converged", root=state.sigma, iterations=iteration)
        sigma_new = new_state.sigma

        low, high = bounds.snapshot()
        if not math.isfinite(sigma_new):
            return NodeRootOutcome(node=u, status="early_exit", iterations=iteration)
        if sigma_new < low or sigma_new > high:
            edge = low if sigma_new < low else high
            return _close_at_edge(labeler, u, state.sigma, h, edge, eps, iteration)

        result = labeler.soft_label(u, sigma_new, eps)
        f_new = result.f_u
        h_new = f_new - PRIOR_LABEL
        if h * h_new <= 0:
            root = _polish_root(labeler, u, state.sigma, h, sigma_new, h_new, eps)
            return NodeRootOutcome(node=u, status="converged", root=root, iterations=iteration)
        if abs(sigma_new - state.sigma) < eps and abs(f_new - f) < eps:
            return _recover_stalled(labeler, u, sigma_new, f_new, result.df_dsigma, eps,
                                    bounds, iteration, max_iter, root_tol)
        state = new_state
        f = f_new
        df = result.df_dsigma

    return NodeRootOutcome(node=u, status="exhausted", iterations=max_iter)


def approx_feedback_set(labeler: SoftLabeler, sigma0: float, eps: float = DEFAULT_EPS,
                        eta: float = DEFAULT_ETA, sigma_min: float = 1.0, sigma_max: float = 7.0,
                        max_iter: int = MAX_ROOT_ITERATIONS, root_tol: float = ROOT_TOLERANCE,
                        workers: Optional[int] = 1,
                        nodes: Optional[Sequence[int]] = None) -> FeedbackInterval:
    """
    Приближенный интервал постоянства потерь, содержащий σ₀.

    Для каждого узла u ∈ U из σ₀ запускается поиск корня f_u(σ) = 1/2.
    Корень ниже σ₀ поднимает σ_l, корень выше σ₀ опускает σ_h. Поиск узла
    прекращается досрочно, если итерация вышла за текущие границы и
    f_u - 1/2 не меняет знак на пересеченной границе.

    Args:
        labeler: Вычислитель мягких меток
        sigma0: Точка запроса
        eps: Точность ε
        eta: Скорость градиентного шага η
        sigma_min: Нижняя граница области
        sigma_max: Верхняя граница области
        max_iter: Предел итераций на узел
        root_tol: Допуск |f_u(σ*) - 1/2| для корня, найденного без смены знака
        workers: Число потоков (1 - последовательно)
        nodes: Подмножество узлов U (по умолчанию все)

    Returns:
        FeedbackInterval: Интервал, потеря при σ₀ и диагностика
    """
    if not sigma_min < sigma_max:
        raise ParameterError(f"Требуется σ_min < σ_max, получено [{sigma_min}, {sigma_max}]")
    if not sigma_min <= sigma0 <= sigma_max:
        raise ParameterError(f"σ₀={sigma0} вне диапазона [{sigma_min}, {sigma_max}]")
    if not eps > 0:
        raise ParameterError(f"ε должно быть положительным, получено {eps}")

    nodes = list(labeler.unlabeled if nodes is None else nodes)
    bounds = IntervalBounds(sigma_min, sigma_max)
    n_jobs = worker_count(workers)

    def run(u):
        outcome = _search_node_root(labeler, int(u), sigma0, eps, eta, bounds, max_iter, root_tol)
        if outcome.status == "converged" and abs(outcome.root - sigma0) >= eps:
            if outcome.root < sigma0:
                bounds.raise_low(outcome.root)
            else:
                bounds.lower_high(outcome.root)
        return outcome

    if n_jobs > 1 and len(nodes) > 1:
        outcomes = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(run)(u) for u in nodes)
    else:
        outcomes = [run(u) for u in nodes]

    counts = {status: 0 for status in ("converged", "rejected", "early_exit", "exhausted", "degenerate")}
    for outcome in outcomes:
        counts[outcome.status] += 1
    roots = sorted(o.root for o in outcomes if o.status == "converged")

    low, high = bounds.snapshot()
    searched = len(nodes) - counts["degenerate"]
    all_skipped = searched > 0 and counts["exhausted"] == searched
    if all_skipped:
        logger.warning(f"σ₀={sigma0:.4f}: поиск корня исчерпал бюджет для всех {searched} узлов")
        low = high = sigma0

    interval = FeedbackInterval(
        sigma_l=low, sigma_h=high, sigma0=sigma0,
        loss=labeler.loss(sigma0, eps), exact=labeler.exact,
        all_skipped=all_skipped, roots=roots, **counts
    )
    logger.debug(
        f"σ₀={sigma0:.4f}: интервал [{low:.5f}, {high:.5f}], потеря {interval.loss:.4f}, "
        f"сошлось {counts['converged']}, отклонено {counts['rejected']}, "
        f"досрочно {counts['early_exit']}, исчерпано {counts['exhausted']}"
    )
    return interval


def enumerate_intervals(labeler: SoftLabeler, sigma_min: float, sigma_max: float,
                        step: float = DEFAULT_STEP, eps: float = DEFAULT_EPS, eta: float = DEFAULT_ETA,
                        max_iter: int = MAX_ROOT_ITERATIONS, root_tol: float = ROOT_TOLERANCE,
                        workers: Optional[int] = 1) -> List[FeedbackInterval]:
    """
    Обход диапазона слева направо: следующая точка запроса σ₀ = σ_h + step.

    Args:
        labeler: Вычислитель мягких меток
        sigma_min: Нижняя граница
        sigma_max: Верхняя граница
        step: Шаг после найденного интервала
        eps: Точность ε
        eta: Скорость градиентного шага
        max_iter: Предел итераций на узел
        root_tol: Допуск принятия корня
        workers: Число потоков

    Returns:
        List[FeedbackInterval]: Интервалы в порядке возрастания σ₀
    """
    if not sigma_min < sigma_max:
        raise ParameterError(f"Требуется σ_min < σ_max, получено [{sigma_min}, {sigma_max}]")
    if not step > 0:
        raise ParameterError(f"Шаг должен быть положительным, получено {step}")

    intervals = []
    sigma0 = float(sigma_min)
    while sigma0 <= sigma_max:
        interval = approx_feedback_set(
            labeler, sigma0, eps=eps, eta=eta, sigma_min=sigma_min, sigma_max=sigma_max,
            max_iter=max_iter, root_tol=root_tol, workers=workers
        )
        intervals.append(interval)
        sigma0 = max(interval.sigma_h, sigma0) + step
    logger.info(
        f"Найдено интервалов: {len(intervals)} на [{sigma_min}, {sigma_max}], "
        f"покрытие {coverage_fraction(intervals, sigma_min, sigma_max):.3f}"
    )
    return intervals


def coverage_fraction(intervals: Sequence[FeedbackInterval], sigma_min: float, sigma_max: float) -> float:
    """Доля диапазона [σ_min, σ_max], покрытая объединением интервалов"""
    spans = sorted((max(iv.sigma_l, sigma_min), min(iv.sigma_h, sigma_max)) for iv in intervals)
    covered = 0.0
    current_start, current_end = None, None
    for start, end in spans:
        if end <= start:
            continue
        if current_end is None or start > current_end:
            if current_end is not None:
                covered += current_end - current_start
            current_start, current_end = start, end
        else:
            current_end = max(current_end, end)
    if current_end is not None:
        covered += current_end - current_start
    return covered / (sigma_max - sigma_min)


def exact_boundaries(labeler: SoftLabeler, sigma_min: float, sigma_max: float,
                     grid: int = 200, tol: float = 1e-8,
                     loss_changes_only: bool = True) -> List[float]:
    """
    Эталонные точки смены меток по точному решателю: плотная сетка и бисекция.

    Args:
        labeler: Вычислитель мягких меток (используется точное решение)
        sigma_min: Нижняя граница
        sigma_max: Верхняя граница
        grid: Число точек сетки
        tol: Точность бисекции по σ
        loss_changes_only: Оставлять только точки, где меняется потеря

    Returns:
        List[float]: Отсортированные границы
    """
    sigmas = np.linspace(sigma_min, sigma_max, grid)
    labels = np.array([labeler.exact_labels(s) >= PRIOR_LABEL for s in sigmas])
    boundaries = []
    for i in range(grid - 1):
        flipped = np.flatnonzero(labels[i] != labels[i + 1])
        for position in flipped:
            lo, hi = sigmas[i], sigmas[i + 1]
            side = labels[i, position]
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if (labeler.exact_labels(mid)[position] >= PRIOR_LABEL) == side:
                    lo = mid
                else:
                    hi = mid
            boundaries.append(0.5 * (lo + hi))
    boundaries = sorted(boundaries)

    if loss_changes_only:
        margin = max(10 * tol, 1e-7)
        boundaries = [
            b for b in boundaries
            if labeler.exact_loss(max(b - margin, sigma_min)) != labeler.exact_loss(min(b + margin, sigma_max))
        ]
    merged = []
    for b in boundaries:
        if not merged or b - merged[-1] > 10 * tol:
            merged.append(b)
    return merged
