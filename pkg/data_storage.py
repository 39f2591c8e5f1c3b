#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Слой хранения результатов экспериментов.
CSV для кривых и интервалов, JSON для сводных таблиц.
Каждая строка помечена хешем конфигурации; сводки содержат версию схемы.
"""

import json
import logging
import math
import os
import tempfile
from contextlib import contextmanager
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from config import SCHEMA_VERSION
from exceptions import FormatError, ParameterError

# Фиксированные столбцы CSV; config_hash добавляется последним
SCHEMAS = {
    'intervals': ['seed', 'sigma_l', 'sigma_h', 'loss', 'status'],
    'sweep': ['sigma', 'accuracy', 'mode', 't'],
    'online': ['round', 'rho', 'loss_approx', 'loss_true', 'regret_cum'],
    'kappa': ['sigma', 'lambda_min', 'lambda_max', 'kappa'],
    'threshold': ['r', 'loss', 'edges'],
}

STATUS_OK = 'ok'
STATUS_FAILED = 'failed'


def _to_builtin(value):
    """Преобразование типов numpy для json"""
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"Тип {type(value).__name__} не сериализуется в JSON")


def _clean(value):
    """NaN и бесконечности заменяются на None"""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class ResultStorage:
    """
    Класс для сохранения и загрузки результатов экспериментов.
    """

    def __init__(self, output_dir: str = "results"):
        """
        Инициализация хранилища результатов

        Args:
            output_dir: Каталог для файлов результатов
        """
        self.output_dir = output_dir
        self.logger = logging.getLogger('data_storage')
        os.makedirs(self.output_dir, exist_ok=True)

    def path(self, filename: str) -> str:
        return os.path.join(self.output_dir, filename)

    @contextmanager
    def atomic_path(self, path: str):
        """Контекстный менеджер: запись во временный файл и атомарная замена"""
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp_', suffix=os.path.basename(path))
        os.close(fd)
        try:
            yield tmp_path
            os.replace(tmp_path, path)
        finally:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)

    def make_frame(self, kind: str, rows: Iterable[Dict[str, Any]], config_hash: str) -> pd.DataFrame:
        """
        Таблица строк заданного вида с фиксированным порядком столбцов.

        Args:
            kind: Вид результата (ключ SCHEMAS)
            rows: Строки
            config_hash: Хеш конфигурации

        Returns:
            pd.DataFrame: Таблица
        """
        if kind not in SCHEMAS:
            raise ParameterError(f"Неизвестный вид результатов: {kind}")
        columns = SCHEMAS[kind]
        frame = pd.DataFrame(list(rows))
        missing = [c for c in columns if c not in frame.columns]
        if frame.empty:
            frame = pd.DataFrame(columns=columns)
        elif missing:
            raise FormatError(f"В строках вида {kind} нет столбцов {missing}")
        frame = frame[columns].copy()
        frame['config_hash'] = config_hash
        return frame

    def write_rows(self, kind: str, rows: Iterable[Dict[str, Any]], config_hash: str,
                   filename: Optional[str] = None, append: bool = False) -> str:
        """
        Сохранение строк в CSV.

        Args:
            kind: Вид результата
            rows: Строки
            config_hash: Хеш конфигурации
            filename: Имя файла (по умолчанию <kind>_<hash>.csv)
            append: Дописать к существующему файлу

        Returns:
            str: Путь к файлу
        """
        frame = self.make_frame(kind, rows, config_hash)
        path = self.path(filename or f"{kind}_{config_hash}.csv")
        if append and os.path.exists(path):
            frame = pd.concat([self.load_rows(kind, path), frame], ignore_index=True)
        with self.atomic_path(path) as tmp_path:
            frame.to_csv(tmp_path, index=False)
        self.logger.info(f"Сохранено строк: {len(frame)} в {path}")
        return path

    def load_rows(self, kind: str, path: str) -> pd.DataFrame:
        """
        Загрузка CSV с проверкой столбцов.

        Args:
            kind: Вид результата
            path: Путь к файлу

        Returns:
            pd.DataFrame: Таблица
        """
        frame = pd.read_csv(path, float_precision='round_trip', dtype={'config_hash': str})
        expected = SCHEMAS[kind] + ['config_hash']
        if list(frame.columns) != expected:
            raise FormatError(f"Столбцы {list(frame.columns)} в {path} не совпадают с ожидаемыми {expected}", offset=0)
        return frame

    def write_summary(self, name: str, payload: Dict[str, Any], config_hash: str,
                      filename: Optional[str] = None) -> str:
        """
        Сохранение сводки в JSON с версией схемы и хешем конфигурации.

        Args:
            name: Имя эксперимента
            payload: Содержимое сводки
            config_hash: Хеш конфигурации
            filename: Имя файла (по умолчанию <name>_<hash>.json)

        Returns:
            str: Путь к файлу
        """
        document = {
            'schema_version': SCHEMA_VERSION,
            'experiment': name,
            'config_hash': config_hash,
            'created_at': datetime.now().isoformat(),
        }
        document.update(payload)
        path = self.path(filename or f"{name}_{config_hash}.json")
        with self.atomic_path(path) as tmp_path:
            with open(tmp_path, 'w', encoding='utf-8') as f:
                json.dump(document, f, ensure_ascii=False, indent=2, default=_to_builtin)
        self.logger.info(f"Сводка {name} сохранена в {path}")
        return path

    def load_summary(self, path: str) -> Dict[str, Any]:
        """Загрузка сводки с проверкой версии схемы"""
        try:
            with open(path, 'r', encoding='utf-8') as f:
                document = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"Сводка {path} повреждена: {e.msg}", offset=e.pos)
        version = document.get('schema_version')
        if version != SCHEMA_VERSION:
            raise FormatError(f"Версия схемы {version} в {path} не поддерживается (ожидается {SCHEMA_VERSION})")
        return document

    def aggregate(self, kind: str, frame: pd.DataFrame) -> Dict[str, Dict[str, Any]]:
        """
        Сводные статистики, раздельно по каждому хешу конфигурации.

        Args:
            kind: Вид результата
            frame: Таблица строк

        Returns:
            Dict[str, Dict[str, Any]]: Статистики по хешам
        """
        aggregators = {
            'intervals': self._aggregate_intervals,
            'sweep': self._aggregate_sweep,
            'online': self._aggregate_online,
            'kappa': self._aggregate_kappa,
            'threshold': self._aggregate_threshold,
        }
        if kind not in aggregators:
            raise ParameterError(f"Неизвестный вид результатов: {kind}")
        result = {}
        for config_hash, group in frame.groupby('config_hash', sort=True):
            result[str(config_hash)] = aggregators[kind](group)
        return result

    @staticmethod
    def _aggregate_intervals(group: pd.DataFrame) -> Dict[str, Any]:
        ok = group[group['status'] == STATUS_OK]
        per_seed = ok.groupby('seed')
        counts = per_seed.size()
        best = per_seed['loss'].min()
        return {
            'subsets': int(counts.shape[0]),
            'failures': int(group.loc[group['status'] == STATUS_FAILED, 'seed'].nunique()),
            'mean_intervals': _clean(float(counts.mean())) if len(counts) else None,
            'mean_best_loss': _clean(float(best.mean())) if len(best) else None,
            'mean_best_accuracy': _clean(float(1.0 - best.mean())) if len(best) else None,
        }

    @staticmethod
    def _aggregate_sweep(group: pd.DataFrame) -> Dict[str, Any]:
        result = {}
        for (mode, t), curve in group.groupby(['mode', 't'], sort=True):
            best = curve.loc[curve['accuracy'].idxmax()]
            result[f"{mode}/t={int(t)}"] = {
                'best_accuracy': float(best['accuracy']),
                'best_sigma': float(best['sigma']),
                'mean_accuracy': float(curve['accuracy'].mean()),
            }
        return result

    @staticmethod
    def _aggregate_online(group: pd.DataFrame) -> Dict[str, Any]:
        rounds = int(group.shape[0])
        regret = group['regret_cum'].iloc[-1] if rounds else float('nan')
        return {
            'rounds': rounds,
            'mean_loss_approx': _clean(float(group['loss_approx'].mean())),
            'final_regret': _clean(float(regret)),
            'average_regret': _clean(float(regret) / rounds) if rounds else None,
        }

    @staticmethod
    def _aggregate_kappa(group: pd.DataFrame) -> Dict[str, Any]:
        return {
            'points': int(group.shape[0]),
            'kappa_min': _clean(float(group['kappa'].min())),
            'kappa_max': _clean(float(group['kappa'].max())),
        }

    @staticmethod
    def _aggregate_threshold(group: pd.DataFrame) -> Dict[str, Any]:
        best = group.loc[group['loss'].idxmin()]
        return {
            'radii': int(group.shape[0]),
            'best_loss': float(best['loss']),
            'best_r': float(best['r']),
            'best_edges': int(best['edges']),
        }

    def list_results(self, kind: str) -> List[str]:
        """Файлы результатов заданного вида в каталоге"""
        prefix = f"{kind}_"
        return sorted(
            self.path(name) for name in os.listdir(self.output_dir)
            if name.startswith(prefix) and name.endswith('.csv')
        )
