#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль запуска экспериментов.
Таблицы времени на интервал, кривые точности по σ, онлайн-прогоны Exp3-Set,
развертки числа обусловленности и порогового семейства графов.
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from config import worker_count
from data_collector import DataCollector
from data_storage import STATUS_FAILED, STATUS_OK, ResultStorage
from exceptions import GraphTuneError
from experiment_config import AuditEventType, ExperimentConfig
from feedback_engine import coverage_fraction, enumerate_intervals
from graph_core import ProblemInstance, build_mutual_knn
from labeling_engine import DelalleauLabeler, HarmonicLabeler, SoftLabeler, SolverMode, dual_loss
from online_learner import DispersedLossStream, InstanceFeedbackProvider, exp3set_run
from sparse_solver import estimate_eigen_extremes

# Итерации оценки крайних собственных чисел в развертке κ(σ)
CONDITION_EIGEN_ITERATIONS = 500
# Наибольшее число порогов r в развертке порогового семейства
MAX_THRESHOLD_RADII = 400


@dataclass
class ResultRow:
    """Строка таблицы времени на интервал"""
    dataset: str
    size: int
    method: str
    seed: int
    tpi: float
    intervals: int
    optimal_accuracy: float
    coverage: float
    graph_seconds: float
    interval_seconds: float
    solves: int
    started_at: str
    config_hash: str
    status: str = STATUS_OK
    error: Optional[str] = None


@dataclass
class ResultTable:
    """Таблица результатов поиска интервалов по подвыборкам"""
    rows: List[ResultRow] = field(default_factory=list)

    def completed(self) -> List[ResultRow]:
        return [row for row in self.rows if row.status == STATUS_OK]

    def failures(self) -> List[ResultRow]:
        return [row for row in self.rows if row.status == STATUS_FAILED]

    def mean_tpi(self) -> Optional[float]:
        done = self.completed()
        if not done:
            return None
        return float(np.mean([row.tpi for row in done]))

    def to_rows(self) -> List[Dict[str, Any]]:
        return [asdict(row) for row in self.rows]


class ExperimentRunner:
    """
    Класс для запуска экспериментов по конфигурации.
    """

    def __init__(self, config: ExperimentConfig, storage: Optional[ResultStorage] = None,
                 collector: Optional[DataCollector] = None, config_manager=None):
        """
        Инициализация запуска экспериментов

        Args:
            config: Конфигурация эксперимента
            storage: Хранилище результатов (по умолчанию в config.output_dir)
            collector: Сборщик данных
            config_manager: Менеджер конфигурации для аудита (необязательно)
        """
        config.validate()
        self.config = config
        self.storage = storage or ResultStorage(config.output_dir)
        self.collector = collector or DataCollector()
        self.config_manager = config_manager
        self.logger = logging.getLogger('experiment_runner')
        self.config_hash = config.config_hash()
        self.sigma_min = config.effective_sigma_min()
        self.sigma_max = float(config.sigma_max)

    @property
    def workers(self) -> int:
        if self.config.timing_mode:
            return 1
        return worker_count(self.config.workers)

    def _audit(self, event_type: AuditEventType, details: Dict[str, Any]):
        if self.config_manager is not None:
            self.config_manager.audit_event(event_type, details=details)

    @contextmanager
    def audited(self, experiment: str):
        """Контекстный менеджер аудита запуска"""
        self._audit(AuditEventType.RUN_STARTED, {'experiment': experiment})
        start = time.perf_counter()
        try:
            yield
        except Exception as e:
            self.logger.error(f"Эксперимент {experiment} завершился ошибкой: {e}")
            self._audit(AuditEventType.RUN_FAILED, {'experiment': experiment, 'error': str(e)})
            raise
        self._audit(AuditEventType.RUN_FINISHED, {
            'experiment': experiment, 'seconds': round(time.perf_counter() - start, 3)
        })

    def method_name(self, mode: Optional[SolverMode] = None, t: Optional[int] = None) -> str:
        mode = SolverMode(mode or self.config.mode)
        if mode == SolverMode.CG_FIXED:
            return f"{self.config.labeler}/{mode.value}(t={t or self.config.t})"
        return f"{self.config.labeler}/{mode.value}"

    def build_labeler(self, instance: ProblemInstance, mode: Optional[SolverMode] = None,
                      t: Optional[int] = None, graph=None, seed: Optional[int] = None) -> SoftLabeler:
        """
        Вычислитель мягких меток по конфигурации.

        Args:
            instance: Постановка задачи
            mode: Режим решателя (по умолчанию из конфигурации)
            t: Число итераций CG (по умолчанию из конфигурации)
            graph: Готовый граф для гармонической разметки
            seed: Зерно выбора Ũ

        Returns:
            SoftLabeler: Вычислитель
        """
        config = self.config
        common = {
            'mode': SolverMode(mode or config.mode),
            't': int(t or config.t),
        }
        if config.labeler == "delalleau":
            return DelalleauLabeler(
                instance, k=config.k, subset_size=config.subset_size, lam=config.delalleau_lambda,
                seed=config.seed if seed is None else seed, sigma_min=self.sigma_min, **common
            )
        return HarmonicLabeler(instance, graph=graph, k=config.k, **common)

    def sigma_grid(self) -> np.ndarray:
        return np.linspace(self.sigma_min, self.sigma_max, self.config.sigma_grid_points)

    # Поиск интервалов

    def _run_subset(self, seed: int) -> Tuple[ResultRow, List[Dict[str, Any]]]:
        config = self.config
        started_at = datetime.now().isoformat()
        try:
            instance = self.collector.build_instance(config, seed)

            # Построение графа не входит во время на интервал
            graph_start = time.perf_counter()
            labeler = self.build_labeler(instance, seed=seed)
            graph_seconds = time.perf_counter() - graph_start

            interval_start = time.perf_counter()
            intervals = enumerate_intervals(
                labeler, self.sigma_min, self.sigma_max, step=config.step, eps=config.eps,
                eta=config.eta, max_iter=config.max_iter, root_tol=config.root_tol, workers=1
            )
            interval_seconds = time.perf_counter() - interval_start
        except GraphTuneError as e:
            self.logger.error(f"Подвыборка {seed}: {e}")
            row = ResultRow(
                dataset=config.source, size=config.n, method=self.method_name(), seed=seed,
                tpi=float('nan'), intervals=0, optimal_accuracy=float('nan'), coverage=0.0,
                graph_seconds=0.0, interval_seconds=0.0, solves=0, started_at=started_at,
                config_hash=self.config_hash, status=STATUS_FAILED, error=str(e)
            )
            marker = {'seed': seed, 'sigma_l': np.nan, 'sigma_h': np.nan, 'loss': np.nan,
                      'status': STATUS_FAILED}
            return row, [marker]

        best_loss = min(interval.loss for interval in intervals)
        row = ResultRow(
            dataset=config.source, size=instance.n, method=self.method_name(), seed=seed,
            tpi=interval_seconds / len(intervals), intervals=len(intervals),
            optimal_accuracy=1.0 - best_loss,
            coverage=coverage_fraction(intervals, self.sigma_min, self.sigma_max),
            graph_seconds=graph_seconds, interval_seconds=interval_seconds,
            solves=labeler.solve_count, started_at=started_at, config_hash=self.config_hash,
        )
        dump = [
            {'seed': seed, 'sigma_l': interval.sigma_l, 'sigma_h': interval.sigma_h,
             'loss': interval.loss, 'status': STATUS_OK}
            for interval in intervals
        ]
        self.logger.info(
            f"Подвыборка {seed}: интервалов {row.intervals}, TpI {row.tpi:.4f} с, "
            f"лучшая точность {row.optimal_accuracy:.4f}"
        )
        return row, dump

    def run_interval_experiment(self) -> Tuple[ResultTable, pd.DataFrame]:
        """
        Поиск интервалов на n_subsets случайных подвыборках.

        Returns:
            Tuple[ResultTable, pd.DataFrame]: Таблица TpI и выгрузка интервалов
        """
        config = self.config
        seeds = [config.seed + s for s in range(config.n_subsets)]
        with self.audited('intervals'):
            workers = self.workers
            if workers > 1 and len(seeds) > 1:
                outcomes = Parallel(n_jobs=workers, prefer="threads")(
                    delayed(self._run_subset)(seed) for seed in seeds
                )
            else:
                outcomes = [self._run_subset(seed) for seed in seeds]

            table = ResultTable(rows=[row for row, _ in outcomes])
            dump = [entry for _, entries in outcomes for entry in entries]
            frame = self.storage.make_frame('intervals', dump, self.config_hash)
            self.storage.write_rows('intervals', dump, self.config_hash)
            self.storage.write_summary('intervals', {
                'config': config.to_dict(),
                'mean_tpi': table.mean_tpi(),
                'table': table.to_rows(),
                'aggregates': self.storage.aggregate('intervals', frame),
            }, self.config_hash)

        if table.failures():
            self.logger.warning(f"Неудачных подвыборок: {len(table.failures())} из {len(seeds)}")
        return table, frame

    # Кривые точности

    def sweep_variants(self) -> List[Tuple[SolverMode, int]]:
        """Режимы решателя кривой точности; t=0 означает отсутствие фиксированного бюджета"""
        variants = [(SolverMode.DIRECT, 0)]
        variants += [(SolverMode.CG_FIXED, int(t)) for t in self.config.t_values]
        variants.append((SolverMode.CG_TOLERANCE, 0))
        return variants

    def run_accuracy_sweep(self, sigma_grid: Optional[Sequence[float]] = None) -> pd.DataFrame:
        """
        Точность 1 - l(σ) на сетке σ для каждого режима решателя и t.

        Args:
            sigma_grid: Сетка σ (по умолчанию равномерная на [σ_min, σ_max])

        Returns:
            pd.DataFrame: Строки sigma, accuracy, mode, t
        """
        config = self.config
        grid = self.sigma_grid() if sigma_grid is None else np.asarray(sigma_grid, dtype=float)
        with self.audited('sweep'):
            instance = self.collector.build_instance(config, config.seed)
            graph = None
            if config.labeler == "harmonic":
                graph = build_mutual_knn(instance.dataset, config.k if config.k is not None else instance.n - 1)

            rows = []
            time_per_solve = {}
            for mode, t in self.sweep_variants():
                labeler = self.build_labeler(instance, mode=mode, t=t or config.t, graph=graph)
                elapsed = 0.0
                for sigma in grid:
                    start = time.perf_counter()
                    values = labeler.soft_labels(float(sigma), config.eps)
                    elapsed += time.perf_counter() - start
                    rows.append({'sigma': float(sigma), 'accuracy': 1.0 - dual_loss(instance, values),
                                 'mode': mode.value, 't': t})
                time_per_solve[f"{mode.value}/t={t}"] = elapsed / len(grid)
                self.logger.info(f"Развертка {mode.value}, t={t}: {elapsed / len(grid):.5f} с на решение")

            frame = self.storage.make_frame('sweep', rows, self.config_hash)
            self.storage.write_rows('sweep', rows, self.config_hash)
            self.storage.write_summary('sweep', {
                'config': config.to_dict(),
                'time_per_solve': time_per_solve,
                'aggregates': self.storage.aggregate('sweep', frame),
            }, self.config_hash)
        return frame

    # Онлайн обучение

    def build_provider(self):
        """Поставщик обратной связи для онлайн-прогона"""
        config = self.config
        if config.online_provider == "stream":
            return DispersedLossStream(
                sigma_min=self.sigma_min, sigma_max=self.sigma_max,
                n_pieces=config.stream_pieces, seed=config.seed
            )
        labelers = []
        for s in range(config.online_instances):
            seed = config.seed + s
            labelers.append(self.build_labeler(self.collector.build_instance(config, seed), seed=seed))
        return InstanceFeedbackProvider(
            labelers, self.sigma_min, self.sigma_max, eps=config.eps, eta=config.eta,
            step=config.step, workers=self.workers, oracle=config.oracle,
            max_iter=config.max_iter, root_tol=config.root_tol
        )

    def run_online_experiment(self):
        """
        Онлайн подбор σ алгоритмом Exp3-Set.

        Returns:
            Tuple[OnlineRunRecord, pd.DataFrame]: Журнал прогона и строки CSV
        """
        config = self.config
        with self.audited('online'):
            provider = self.build_provider()
            record = exp3set_run(
                provider, config.rounds, step=config.exp3_step, beta=config.beta, m_hat=config.m_hat,
                sigma_min=self.sigma_min, sigma_max=self.sigma_max, seed=config.seed,
                compute_regret=config.oracle,
                eps=config.eps if config.online_provider == "instances" else None,
            )
            rows = record.to_rows()
            frame = self.storage.make_frame('online', rows, self.config_hash)
            self.storage.write_rows('online', rows, self.config_hash)
            self.storage.write_summary('online', {
                'config': config.to_dict(),
                'step': record.step,
                'best_parameter': record.best_parameter,
                'regret': record.regret,
                'average_regret': record.average_regret,
                'piece_count': record.piece_count,
                'capped_count': record.capped_count,
                'implied_beta_prime': record.implied_beta_prime,
                'aggregates': self.storage.aggregate('online', frame),
            }, self.config_hash)
        return record, frame

    # Обусловленность и пороговое семейство

    def run_condition_sweep(self, sigma_grid: Optional[Sequence[float]] = None) -> pd.DataFrame:
        """
        Крайние собственные числа и κ системы разметки как функция σ.

        Returns:
            pd.DataFrame: Строки sigma, lambda_min, lambda_max, kappa
        """
        config = self.config
        grid = self.sigma_grid() if sigma_grid is None else np.asarray(sigma_grid, dtype=float)
        with self.audited('kappa'):
            instance = self.collector.build_instance(config, config.seed)
            labeler = self.build_labeler(instance, mode=SolverMode.DIRECT)
            rows = []
            for sigma in grid:
                system = labeler.assemble(float(sigma))
                matrix = system.system if isinstance(labeler, HarmonicLabeler) else system.matrix
                if matrix.n == 0:
                    self.logger.warning(f"σ={sigma:.4f}: система пуста, точка пропущена")
                    continue
                extremes = estimate_eigen_extremes(matrix, iters=CONDITION_EIGEN_ITERATIONS, seed=config.seed)
                rows.append({'sigma': float(sigma), 'lambda_min': extremes.lambda_min,
                             'lambda_max': extremes.lambda_max, 'kappa': extremes.condition_number})

            frame = self.storage.make_frame('kappa', rows, self.config_hash)
            self.storage.write_rows('kappa', rows, self.config_hash)
            self.storage.write_summary('kappa', {
                'config': config.to_dict(),
                'aggregates': self.storage.aggregate('kappa', frame),
            }, self.config_hash)
        return frame

    def run_threshold_sweep(self, max_radii: int = MAX_THRESHOLD_RADII) -> pd.DataFrame:
        """
        Потеря гармонической разметки на невзвешенных графах G(k, r).
        Потеря постоянна между соседними расстояниями ребер, поэтому r
        перебирается по отсортированным различным расстояниям.

        Args:
            max_radii: Наибольшее число проверяемых порогов

        Returns:
            pd.DataFrame: Строки r, loss, edges
        """
        config = self.config
        with self.audited('threshold'):
            instance = self.collector.build_instance(config, config.seed)
            graph = build_mutual_knn(instance.dataset, config.k if config.k is not None else instance.n - 1)
            radii = np.unique(graph.distances[graph.distances > 0])
            if radii.shape[0] > max_radii:
                radii = radii[np.unique(np.linspace(0, radii.shape[0] - 1, max_radii).round().astype(int))]

            rows = []
            for r in radii:
                thresholded = graph.threshold(float(r))
                labeler = HarmonicLabeler(instance, graph=thresholded, mode=SolverMode.DIRECT)
                rows.append({'r': float(r), 'loss': labeler.exact_loss(1.0), 'edges': thresholded.edge_count})

            frame = self.storage.make_frame('threshold', rows, self.config_hash)
            self.storage.write_rows('threshold', rows, self.config_hash)
            self.storage.write_summary('threshold', {
                'config': config.to_dict(),
                'aggregates': self.storage.aggregate('threshold', frame),
            }, self.config_hash)
        return frame

    def write_synthetic_dataset(self, path: Optional[str] = None) -> str:
        """
        Сохранение синтетических облаков в CSV (метка, затем признаки).

        Args:
            path: Путь к файлу (по умолчанию synth_<hash>.csv в каталоге результатов)

        Returns:
            str: Путь к файлу
        """
        config = self.config
        with self.audited('synth'):
            instance = self.collector.synthetic_collector.blobs(
                config.n, config.separation, noise=config.noise, seed=config.seed,
                dim=config.dim, n_labeled=config.labeled_size()
            )
            path = path or self.storage.path(f"synth_{self.config_hash}.csv")
            self.collector.csv_collector.write(instance.dataset, path)
        return path


def run_interval_experiment(config: ExperimentConfig) -> Tuple[ResultTable, pd.DataFrame]:
    return ExperimentRunner(config).run_interval_experiment()


def run_accuracy_sweep(config: ExperimentConfig, sigma_grid: Optional[Sequence[float]] = None) -> pd.DataFrame:
    return ExperimentRunner(config).run_accuracy_sweep(sigma_grid)


def run_online_experiment(config: ExperimentConfig):
    return ExperimentRunner(config).run_online_experiment()


def run_condition_sweep(config: ExperimentConfig, sigma_grid: Optional[Sequence[float]] = None) -> pd.DataFrame:
    return ExperimentRunner(config).run_condition_sweep(sigma_grid)


def run_threshold_sweep(config: ExperimentConfig) -> pd.DataFrame:
    return ExperimentRunner(config).run_threshold_sweep()
