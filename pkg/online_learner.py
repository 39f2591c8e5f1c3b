#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль онлайн-обучения σ.
Экспоненциальные веса над отрезком [σ_min, σ_max] с приближенной
полубандитной обратной связью: кусочно-постоянная плотность в
логарифмической шкале, точная выборка и обновление, учет регрета.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from exceptions import ContractViolationError, ParameterError
from feedback_engine import approx_feedback_set, enumerate_intervals

logger = logging.getLogger('online_learner')

IMPORTANCE_CAP = 1e4
# Допуск принадлежности ρ интервалу обратной связи
CONTAINMENT_SLACK = 1e-9


class PiecewiseConstantDensity:
    """
    Кусочно-постоянная функция весов w(ρ) на [σ_min, σ_max].
    Хранит точки разбиения и логарифмы значений на кусках.
    """

    def __init__(self, breakpoints, log_weights):
        """
        Args:
            breakpoints: Строго возрастающие точки b₀ < b₁ < ... < b_m
            log_weights: Логарифмы значений w на m кусках
        """
        breakpoints = np.asarray(breakpoints, dtype=float)
        log_weights = np.asarray(log_weights, dtype=float)
        if breakpoints.ndim != 1 or breakpoints.shape[0] < 2:
            raise ParameterError("Нужно как минимум две точки разбиения")
        if log_weights.shape[0] != breakpoints.shape[0] - 1:
            raise ParameterError("Число весов должно быть на единицу меньше числа точек разбиения")
        if np.any(np.diff(breakpoints) <= 0):
            raise ParameterError("Точки разбиения должны строго возрастать")
        if not np.all(np.isfinite(log_weights)):
            raise ParameterError("Логарифмы весов должны быть конечными")
        self.breakpoints = breakpoints
        self.log_weights = log_weights
        self._log_total = float(logsumexp(log_weights + np.log(np.diff(breakpoints))))

    @classmethod
    def uniform(cls, sigma_min: float, sigma_max: float) -> 'PiecewiseConstantDensity':
        if not sigma_min < sigma_max:
            raise ParameterError(f"Требуется σ_min < σ_max, получено [{sigma_min}, {sigma_max}]")
        return cls([sigma_min, sigma_max], [0.0])

    @property
    def sigma_min(self) -> float:
        return float(self.breakpoints[0])

    @property
    def sigma_max(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_pieces(self) -> int:
        return self.log_weights.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def log_total(self) -> float:
        """Логарифм ∫w"""
        return self._log_total

    def piece_masses(self) -> np.ndarray:
        """Вероятностные массы кусков"""
        return np.exp(self.log_weights + np.log(self.widths) - self._log_total)

    def density(self, rho: float) -> float:
        """Значение нормированной плотности p(ρ)"""
        index = self._piece_index(rho)
        return float(np.exp(self.log_weights[index] - self._log_total))

    def mass(self, a: float, b: float) -> float:
        """∫_a^b p(ρ)dρ"""
        lo = np.clip(a, self.breakpoints[:-1], self.breakpoints[1:])
        hi = np.clip(b, self.breakpoints[:-1], self.breakpoints[1:])
        overlap = np.maximum(hi - lo, 0.0)
        values = np.exp(self.log_weights - self._log_total)
        return float(np.sum(overlap * values))

    def sample(self, rng: np.random.Generator) -> float:
        """Точная выборка: кусок пропорционально массе, затем равномерно внутри"""
        masses = self.piece_masses()
        index = rng.choice(self.n_pieces, p=masses / masses.sum())
        return float(rng.uniform(self.breakpoints[index], self.breakpoints[index + 1]))

    def split(self, a: float, b: float) -> 'PiecewiseConstantDensity':
        """Добавление точек разбиения a и b, если их еще нет"""
        breakpoints = self.breakpoints
        log_weights = self.log_weights
        for point in (a, b):
            if point <= breakpoints[0] or point >= breakpoints[-1] or np.any(breakpoints == point):
                continue
            index = int(np.searchsorted(breakpoints, point)) - 1
            breakpoints = np.insert(breakpoints, index + 1, point)
            log_weights = np.insert(log_weights, index, log_weights[index])
        return PiecewiseConstantDensity(breakpoints, log_weights)

    def update(self, a: float, b: float, loss: float, step: float,
               cap: float = IMPORTANCE_CAP) -> Tuple['PiecewiseConstantDensity', float, bool]:
        """
        Мультипликативное обновление w(ρ)·exp(-λ·l̂(ρ)) с оценкой
        l̂(ρ) = 1{ρ ∈ [a,b]}·l̃ / p([a,b]).

        Args:
            a: Левая граница интервала обратной связи
            b: Правая граница
            loss: Приближенная потеря l̃
            step: Шаг λ
            cap: Верхняя граница веса важности

        Returns:
            Tuple[PiecewiseConstantDensity, float, bool]: Новая плотность,
            использованный вес важности, признак ограничения веса
        """
        a = max(float(a), self.sigma_min)
        b = min(float(b), self.sigma_max)
        if not a < b:
            raise ParameterError(f"Интервал обратной связи пуст: [{a}, {b}]")
        probability = self.mass(a, b)
        weight = 1.0 / probability if probability > 0 else math.inf
        capped = weight > cap
        if capped:
            weight = cap
        if loss == 0:
            return self, weight, capped

        refined = self.split(a, b)
        mids = 0.5 * (refined.breakpoints[:-1] + refined.breakpoints[1:])
        inside = (mids > a) & (mids < b)
        log_weights = refined.log_weights.copy()
        log_weights[inside] -= step * loss * weight
        # Нормировка в логарифмической шкале сохраняет p и исключает переполнение
        log_weights -= logsumexp(log_weights + np.log(refined.widths))
        return PiecewiseConstantDensity(refined.breakpoints, log_weights), weight, capped

    def _piece_index(self, rho: float) -> int:
        if rho < self.breakpoints[0] or rho > self.breakpoints[-1]:
            raise ParameterError(f"ρ={rho} вне области [{self.sigma_min}, {self.sigma_max}]")
        return int(min(np.searchsorted(self.breakpoints, rho, side='right') - 1, self.n_pieces - 1))


def density_sample(density: PiecewiseConstantDensity, rng: np.random.Generator) -> float:
    return density.sample(rng)


def density_update(density: PiecewiseConstantDensity, a: float, b: float, loss: float,
                   step: float, cap: float = IMPORTANCE_CAP) -> PiecewiseConstantDensity:
    """Обновление плотности по интервалу обратной связи [a, b] и потере l̃"""
    updated, _, capped = density.update(a, b, loss, step, cap)
    if capped:
        logger.warning(f"Вес важности ограничен значением {cap:g} для интервала [{a:.5f}, {b:.5f}]")
    return updated


def importance_weighted_estimate(density: PiecewiseConstantDensity, a: float, b: float,
                                 loss: float, rho: float, cap: float = IMPORTANCE_CAP) -> float:
    """Оценка l̂(ρ) = 1{ρ ∈ [a,b]}·l̃ / p([a,b])"""
    if not a <= rho <= b:
        return 0.0
    probability = density.mass(a, b)
    return loss * min(1.0 / probability if probability > 0 else math.inf, cap)


class PiecewiseConstantLoss:
    """Кусочно-постоянная функция потерь на [σ_min, σ_max]"""

    def __init__(self, breakpoints, values):
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape[0] != self.breakpoints.shape[0] - 1:
            raise ParameterError("Число значений должно быть на единицу меньше числа точек разбиения")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ParameterError("Точки разбиения должны строго возрастать")

    def _index(self, rho):
        index = np.searchsorted(self.breakpoints, rho, side='right') - 1
        return np.clip(index, 0, self.values.shape[0] - 1)

    def __call__(self, rho):
        return self.values[self._index(rho)]

    def piece(self, rho: float) -> Tuple[float, float, float]:
        """(a, b, значение) куска, содержащего ρ"""
        index = int(self._index(rho))
        return float(self.breakpoints[index]), float(self.breakpoints[index + 1]), float(self.values[index])


def best_fixed_parameter(losses: Sequence[PiecewiseConstantLoss]) -> Tuple[float, float]:
    """
    Лучшее фиксированное ρ по сумме потерь.

    Returns:
        Tuple[float, float]: ρ* и суммарная потеря при ρ*
    """
    points = np.unique(np.concatenate([loss.breakpoints for loss in losses]))
    mids = 0.5 * (points[:-1] + points[1:])
    totals = np.zeros_like(mids)
    for loss in losses:
        totals += loss(mids)
    best = int(np.argmin(totals))
    return float(mids[best]), float(totals[best])


def intervals_to_loss(intervals, sigma_min: float, sigma_max: float) -> PiecewiseConstantLoss:
    """
    Кусочно-постоянная потеря по списку интервалов обхода.
    Промежуток между интервалами получает потерю следующего интервала.
    """
    breakpoints = [float(sigma_min)]
    values = []
    for interval in intervals:
        end = min(max(interval.sigma_h, interval.sigma0), sigma_max)
        if end > breakpoints[-1]:
            breakpoints.append(end)
            values.append(interval.loss)
    if breakpoints[-1] < sigma_max:
        breakpoints.append(float(sigma_max))
        values.append(intervals[-1].loss if intervals else 0.0)
    return PiecewiseConstantLoss(breakpoints, values)


class FeedbackProvider(ABC):
    """Источник (ε,γ)-приближенной полубандитной обратной связи"""

    @abstractmethod
    def feedback(self, t: int, rho: float) -> Tuple[float, float, float]:
        """Интервал [a, b], содержащий ρ, и приближенная потеря"""

    def true_loss(self, t: int, rho: float) -> Optional[float]:
        return None

    def loss_functions(self, rounds: int) -> Optional[List[PiecewiseConstantLoss]]:
        return None


class DispersedLossStream(FeedbackProvider):
    """
    Синтетический поток кусочно-постоянных потерь с общим куском нулевой
    потери и равномерно разбросанными прочими границами.
    """

    def __init__(self, sigma_min: float = 1.0, sigma_max: float = 7.0, n_pieces: int = 5,
                 zero_width: float = 0.25, seed: int = 0, eps: float = 0.0, gamma: float = 0.0,
                 zero_start: Optional[float] = None):
        """
        Args:
            sigma_min: Нижняя граница области
            sigma_max: Верхняя граница области
            n_pieces: Число кусков каждой функции потерь
            zero_width: Доля области, занятая куском нулевой потери
            seed: Зерно генератора
            eps: Сдвиг границ интервала обратной связи (не больше ε)
            gamma: Искажение потерь (не больше γ)
            zero_start: Левый конец куска нулевой потери
        """
        if n_pieces < 1:
            raise ParameterError(f"Число кусков должно быть положительным, получено {n_pieces}")
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        self.n_pieces = int(n_pieces)
        self.eps = float(eps)
        self.gamma = float(gamma)
        self._rng = np.random.default_rng(seed)
        self._noise = np.random.default_rng(seed + 1)
        span = self.sigma_max - self.sigma_min
        width = zero_width * span
        if zero_start is None:
            zero_start = self._rng.uniform(self.sigma_min, self.sigma_max - width)
        self.zero_piece = (float(zero_start), float(zero_start + width))
        self._losses = []

    def _generate(self) -> PiecewiseConstantLoss:
        a, b = self.zero_piece
        cuts = self._rng.uniform(self.sigma_min, self.sigma_max, size=max(self.n_pieces - 1, 0))
        cuts = cuts[(cuts < a) | (cuts > b)]
        points = np.unique(np.concatenate([[self.sigma_min, a, b, self.sigma_max], cuts]))
        mids = 0.5 * (points[:-1] + points[1:])
        values = self._rng.uniform(0.3, 1.0, size=mids.shape[0])
        values[(mids > a) & (mids < b)] = 0.0
        return PiecewiseConstantLoss(points, values)

    def loss_at(self, t: int) -> PiecewiseConstantLoss:
        while len(self._losses) <= t:
            self._losses.append(self._generate())
        return self._losses[t]

    def feedback(self, t: int, rho: float) -> Tuple[float, float, float]:
        a, b, value = self.loss_at(t).piece(rho)
        if self.eps > 0:
            a = min(a + self._noise.uniform(-self.eps, self.eps), rho)
            b = max(b + self._noise.uniform(-self.eps, self.eps), rho)
            a, b = max(a, self.sigma_min), min(b, self.sigma_max)
            if not a < b:
                a, b = max(rho - self.eps, self.sigma_min), min(rho + self.eps, self.sigma_max)
        if self.gamma > 0:
            value = float(np.clip(value + self._noise.uniform(-self.gamma, self.gamma), 0.0, 1.0))
        return a, b, value

    def true_loss(self, t: int, rho: float) -> float:
        return float(self.loss_at(t)(rho))

    def loss_functions(self, rounds: int) -> List[PiecewiseConstantLoss]:
        return [self.loss_at(t) for t in range(rounds)]


@dataclass
class RoundRecord:
    """Запись одного раунда"""
    round: int
    rho: float
    interval: Tuple[float, float]
    loss_approx: float
    loss_true: Optional[float]
    importance_weight: float
    capped: bool


@dataclass
class OnlineRunRecord:
    """Журнал онлайн-прогона"""
    rounds: List[RoundRecord]
    step: float
    beta: float
    m_hat: float
    regret_trace: Optional[np.ndarray] = None
    best_parameter: Optional[float] = None
    piece_count: int = 1
    capped_count: int = 0
    implied_beta_prime: Optional[float] = None
    density: Optional[PiecewiseConstantDensity] = field(default=None, repr=False)

    @property
    def total_rounds(self) -> int:
        return len(self.rounds)

    @property
    def regret(self) -> Optional[float]:
        if self.regret_trace is None or not len(self.regret_trace):
            return None
        return float(self.regret_trace[-1])

    @property
    def average_regret(self) -> Optional[float]:
        regret = self.regret
        return None if regret is None else regret / self.total_rounds

    def to_rows(self) -> List[dict]:
        """Строки CSV: round, rho, loss_approx, loss_true, regret_cum"""
        rows = []
        for i, record in enumerate(self.rounds):
            rows.append({
                'round': record.round,
                'rho': record.rho,
                'loss_approx': record.loss_approx,
                'loss_true': np.nan if record.loss_true is None else record.loss_true,
                'regret_cum': np.nan if self.regret_trace is None else float(self.regret_trace[i]),
            })
        return rows


def default_step_size(rounds: int, sigma_min: float, sigma_max: float, beta: float = 0.5,
                      m_hat: float = 40, d: int = 1) -> float:
    """
    Шаг √(2·d·log(R·T^β)/(T·M̂)), R = (σ_max - σ_min)/2.
    Логарифм ограничен снизу единицей.
    """
    if rounds < 1 or m_hat <= 0:
        raise ParameterError(f"Некорректные параметры шага: T={rounds}, M̂={m_hat}")
    radius = (sigma_max - sigma_min) / 2.0
    log_term = max(math.log(radius * rounds ** beta), 1.0)
    return math.sqrt(2.0 * d * log_term / (rounds * m_hat))


def implied_beta_prime(rounds: int, beta: float, eps: Optional[float], gamma: Optional[float]) -> Optional[float]:
    """
    Показатель β′, при котором γ ≤ T^(-β′) и ε ≤ 2T^(-β)·T^(-β′).
    """
    if rounds < 2 or (not eps and not gamma):
        return None
    log_t = math.log(rounds)
    candidates = []
    if gamma:
        candidates.append(-math.log(gamma) / log_t)
    if eps:
        candidates.append(-math.log(eps / (2.0 * rounds ** (-beta))) / log_t)
    return min(candidates)


def exp3set_run(provider: FeedbackProvider, rounds: int, step: Optional[float] = None,
                beta: float = 0.5, m_hat: float = 40, sigma_min: float = 1.0, sigma_max: float = 7.0,
                seed: int = 0, compute_regret: bool = True, importance_cap: float = IMPORTANCE_CAP,
                eps: Optional[float] = None, gamma: Optional[float] = None) -> OnlineRunRecord:
    """
    Непрерывный Exp3-Set с приближенной обратной связью.

    Args:
        provider: Источник обратной связи
        rounds: Число раундов T
        step: Шаг λ (None - по формуле регретной оценки)
        beta: Параметр дисперсности β
        m_hat: Оценка размера системы обратной связи M̂
        sigma_min: Нижняя граница области
        sigma_max: Верхняя граница области
        seed: Зерно выборки
        compute_regret: Считать регрет по функциям потерь поставщика
        importance_cap: Верхняя граница веса важности
        eps: Заявленная точность интервалов (для β′)
        gamma: Заявленная точность потерь (для β′)

    Returns:
        OnlineRunRecord: Журнал прогона
    """
    if rounds < 1:
        raise ParameterError(f"Число раундов должно быть положительным, получено {rounds}")
    if step is None:
        step = default_step_size(rounds, sigma_min, sigma_max, beta, m_hat)
    rng = np.random.default_rng(seed)
    density = PiecewiseConstantDensity.uniform(sigma_min, sigma_max)

    records = []
    capped_count = 0
    for t in range(rounds):
        rho = density.sample(rng)
        a, b, loss_approx = provider.feedback(t, rho)
        if not a - CONTAINMENT_SLACK <= rho <= b + CONTAINMENT_SLACK:
            raise ContractViolationError(
                f"Раунд {t}: интервал обратной связи [{a}, {b}] не содержит ρ={rho}"
            )
        density, weight, capped = density.update(a, b, loss_approx, step, importance_cap)
        capped_count += int(capped)
        records.append(RoundRecord(
            round=t, rho=rho, interval=(a, b), loss_approx=float(loss_approx),
            loss_true=provider.true_loss(t, rho), importance_weight=weight, capped=capped
        ))
    if capped_count:
        logger.warning(f"Вес важности ограничен в {capped_count} раундах из {rounds}")

    record = OnlineRunRecord(
        rounds=records, step=step, beta=beta, m_hat=m_hat,
        piece_count=density.n_pieces, capped_count=capped_count,
        implied_beta_prime=implied_beta_prime(rounds, beta, eps, gamma), density=density,
    )

    losses = provider.loss_functions(rounds) if compute_regret else None
    if losses:
        best_rho, _ = best_fixed_parameter(losses)
        played = np.array([loss(r.rho) for loss, r in zip(losses, records)], dtype=float)
        best = np.array([loss(best_rho) for loss in losses], dtype=float)
        record.regret_trace = np.cumsum(played - best)
        record.best_parameter = best_rho
        logger.info(
            f"Exp3-Set: T={rounds}, λ={step:.4g}, средний регрет {record.average_regret:.4f}, "
            f"лучшее σ={best_rho:.4f}, кусков плотности {density.n_pieces}"
        )
    return record


@dataclass
class DispersionRow:
    """Строка диагностики дисперсности"""
    eps: float
    violations: int
    center: Optional[float]
    instances: int


def dispersion_diagnostic(boundary_lists: Sequence[Sequence[float]], eps_grid: Sequence[float],
                          sigma_min: float = 1.0, sigma_max: float = 7.0) -> List[DispersionRow]:
    """
    Для каждого ε - наибольшее число функций потерь с разрывом внутри
    одного отрезка длины ε.

    Args:
        boundary_lists: Границы кусков каждой функции потерь
        eps_grid: Длины отрезков
        sigma_min: Нижняя граница области
        sigma_max: Верхняя граница области

    Returns:
        List[DispersionRow]: Худший отрезок для каждого ε
    """
    if len(boundary_lists) < 2:
        logger.warning("Диагностика дисперсности по менее чем двум функциям потерь малоинформативна")
    cleaned = [
        np.sort(np.asarray([b for b in boundaries if sigma_min < b < sigma_max], dtype=float))
        for boundaries in boundary_lists
    ]
    starts = np.unique(np.concatenate(cleaned)) if cleaned and any(c.size for c in cleaned) else np.array([])

    rows = []
    for eps in eps_grid:
        best_count, best_center = 0, None
        for start in starts:
            count = 0
            for boundaries in cleaned:
                lo = np.searchsorted(boundaries, start, side='left')
                hi = np.searchsorted(boundaries, start + eps, side='right')
                count += int(hi > lo)
            if count > best_count:
                best_count, best_center = count, float(start + eps / 2.0)
        rows.append(DispersionRow(eps=float(eps), violations=best_count,
                                  center=best_center, instances=len(boundary_lists)))
    return rows


class InstanceFeedbackProvider(FeedbackProvider):
    """
    Обратная связь по реальным задачам: интервал вокруг ρ находится поиском
    приближенного интервала постоянства потерь.
    """

    def __init__(self, labelers, sigma_min: float, sigma_max: float, eps: float = 1e-4,
                 eta: float = 1.0, step: float = 0.05, workers: Optional[int] = 1,
                 oracle: bool = False, max_iter: int = 100, root_tol: float = 1e-4):
        """
        Args:
            labelers: Вычислители мягких меток, по одному на задачу (используются по кругу)
            sigma_min: Нижняя граница области
            sigma_max: Верхняя граница области
            eps: Точность ε
            eta: Скорость градиентного шага
            step: Шаг обхода для функций потерь регрета
            workers: Число потоков
            oracle: Считать истинные потери и регрет
        """
        self.labelers = list(labelers)
        if not self.labelers:
            raise ParameterError("Нужна хотя бы одна задача")
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        self.eps = float(eps)
        self.eta = float(eta)
        self.step = float(step)
        self.workers = workers
        self.oracle = oracle
        self.max_iter = max_iter
        self.root_tol = root_tol
        self.intervals = []
        self._loss_cache = {}

    def _labeler(self, t: int):
        return self.labelers[t % len(self.labelers)]

    def feedback(self, t: int, rho: float) -> Tuple[float, float, float]:
        interval = approx_feedback_set(
            self._labeler(t), rho, eps=self.eps, eta=self.eta,
            sigma_min=self.sigma_min, sigma_max=self.sigma_max,
            max_iter=self.max_iter, root_tol=self.root_tol, workers=self.workers
        )
        self.intervals.append(interval)
        a, b = interval.sigma_l, interval.sigma_h
        if b - a < 2 * self.eps:
            a = max(rho - self.eps, self.sigma_min)
            b = min(rho + self.eps, self.sigma_max)
        return a, b, interval.loss

    def true_loss(self, t: int, rho: float) -> Optional[float]:
        if not self.oracle:
            return None
        return self._labeler(t).exact_loss(rho)

    def loss_functions(self, rounds: int) -> Optional[List[PiecewiseConstantLoss]]:
        if not self.oracle:
            return None
        losses = []
        for t in range(rounds):
            index = t % len(self.labelers)
            if index not in self._loss_cache:
                intervals = enumerate_intervals(
                    self.labelers[index], self.sigma_min, self.sigma_max, step=self.step,
                    eps=self.eps, eta=self.eta, max_iter=self.max_iter,
                    root_tol=self.root_tol, workers=self.workers
                )
                self._loss_cache[index] = intervals_to_loss(intervals, self.sigma_min, self.sigma_max)
            losses.append(self._loss_cache[index])
        return losses
