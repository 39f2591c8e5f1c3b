#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль конфигурации экспериментов.
Хранит параметры эксперимента, проверяет их согласованность и ведет аудит запусков.
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional

from config import SIGMA_MAX, default_sigma_min
from exceptions import ConfigError
from labeling_engine import DEFAULT_DELALLEAU_LAMBDA, DEFAULT_SUBSET_SIZE, SolverMode

SOURCES = ("mnist", "fashion", "usps", "csv", "synthetic")
LABELERS = ("harmonic", "delalleau")
ONLINE_PROVIDERS = ("instances", "stream")

# Поля, не влияющие на численные результаты
_NON_RESULT_FIELDS = ("output_dir", "workers", "images_path", "labels_path", "csv_path")


class AuditEventType(Enum):
    """Типы событий аудита"""
    RUN_STARTED = "RUN_STARTED"
    RUN_FINISHED = "RUN_FINISHED"
    RUN_FAILED = "RUN_FAILED"
    CONFIG_CHANGED = "CONFIG_CHANGED"


@dataclass
class ExperimentConfig:
    """Конфигурация эксперимента"""
    # Источник данных
    source: str = "synthetic"
    images_path: Optional[str] = None
    labels_path: Optional[str] = None
    csv_path: Optional[str] = None
    class_a: int = 0
    class_b: int = 1
    pca_components: Optional[int] = 45
    separation: float = 4.0
    noise: float = 1.0
    dim: int = 2

    # Задача и граф
    n: int = 100
    n_labeled: Optional[int] = None
    k: Optional[int] = None
    labeler: str = "harmonic"
    subset_size: int = DEFAULT_SUBSET_SIZE
    delalleau_lambda: float = DEFAULT_DELALLEAU_LAMBDA

    # Поиск интервалов
    sigma_min: Optional[float] = None
    sigma_max: float = SIGMA_MAX
    step: float = 0.05
    eps: float = 1e-4
    eta: float = 1.0
    max_iter: int = 100
    root_tol: float = 1e-4

    # Решатель
    mode: str = "cg"
    t: int = 20
    t_values: List[int] = field(default_factory=lambda: [5, 10, 20])
    sigma_grid_points: int = 61

    # Онлайн обучение
    rounds: int = 200
    exp3_step: Optional[float] = None
    beta: float = 0.5
    m_hat: int = 40
    online_instances: int = 5
    online_provider: str = "instances"
    stream_pieces: int = 5
    oracle: bool = True

    # Запуск
    seed: int = 0
    n_subsets: int = 10
    workers: Optional[int] = None
    timing_mode: bool = False
    output_dir: str = "results"

    def labeled_size(self) -> int:
        """Размер L: явно заданный или n/10 (не меньше 2)"""
        if self.n_labeled is not None:
            return int(self.n_labeled)
        return max(2, self.n // 10)

    def effective_sigma_min(self) -> float:
        """Нижняя граница σ: явно заданная или значение по умолчанию для источника и режима"""
        if self.sigma_min is not None:
            return float(self.sigma_min)
        return default_sigma_min(self.source, self.mode)

    def validate(self):
        """
        Проверка согласованности параметров.

        Raises:
            ConfigError: Если параметры противоречат друг другу
        """
        errors = []
        if self.source not in SOURCES:
            errors.append(f"неизвестный источник {self.source}")
        if self.labeler not in LABELERS:
            errors.append(f"неизвестный тип разметки {self.labeler}")
        if self.mode not in [m.value for m in SolverMode]:
            errors.append(f"неизвестный режим решателя {self.mode}")
        if self.class_a == self.class_b:
            errors.append("классы class_a и class_b совпадают")
        if self.n < 4:
            errors.append(f"n={self.n} меньше 4")
        labeled = self.labeled_size()
        if not 2 <= labeled < self.n:
            errors.append(f"требуется 2 ≤ |L| < n, получено |L|={labeled}, n={self.n}")
        if self.labeler == "delalleau":
            if not 1 <= self.subset_size <= self.n - labeled:
                errors.append(f"требуется 1 ≤ |Ũ| ≤ n - |L|, получено |Ũ|={self.subset_size}")
            if not self.delalleau_lambda > 0:
                errors.append(f"delalleau_lambda={self.delalleau_lambda} должно быть положительным")
        if self.k is not None and not 1 <= self.k < self.n:
            errors.append(f"требуется 1 ≤ k < n, получено k={self.k}")
        sigma_min = self.effective_sigma_min()
        if not 0 < sigma_min < self.sigma_max:
            errors.append(f"требуется 0 < σ_min < σ_max, получено [{sigma_min}, {self.sigma_max}]")
        for name in ("step", "eps", "eta", "root_tol", "noise", "beta"):
            if not getattr(self, name) > 0:
                errors.append(f"{name}={getattr(self, name)} должно быть положительным")
        for name in ("t", "max_iter", "rounds", "m_hat", "online_instances", "n_subsets", "dim", "stream_pieces"):
            if getattr(self, name) < 1:
                errors.append(f"{name}={getattr(self, name)} должно быть не меньше 1")
        if not self.t_values or any(t < 1 for t in self.t_values):
            errors.append(f"t_values={self.t_values} должны быть положительными")
        if self.sigma_grid_points < 2:
            errors.append(f"sigma_grid_points={self.sigma_grid_points} должно быть не меньше 2")
        if self.pca_components is not None and self.pca_components < 1:
            errors.append(f"pca_components={self.pca_components} должно быть положительным")
        if self.online_provider not in ONLINE_PROVIDERS:
            errors.append(f"неизвестный поставщик обратной связи {self.online_provider}")
        if self.exp3_step is not None and not self.exp3_step > 0:
            errors.append(f"exp3_step={self.exp3_step} должно быть положительным")
        if errors:
            raise ConfigError("Некорректная конфигурация: " + "; ".join(errors))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """Создание конфигурации из словаря; неизвестные ключи игнорируются"""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            logging.getLogger('experiment_config').warning(f"Неизвестные параметры конфигурации: {unknown}")
        return cls(**{key: value for key, value in data.items() if key in known})

    def config_hash(self) -> str:
        """Первые 12 шестнадцатеричных символов sha256 параметров, влияющих на результат"""
        payload = {key: value for key, value in self.to_dict().items() if key not in _NON_RESULT_FIELDS}
        payload["sigma_min"] = self.effective_sigma_min()
        payload["n_labeled"] = self.labeled_size()
        encoded = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode('utf-8')
        return hashlib.sha256(encoded).hexdigest()[:12]


class ConfigManager:
    """
    Класс для загрузки, изменения и аудита конфигурации эксперимента.
    """

    def __init__(self, config_file: Optional[str] = "experiment_config.json", enable_auditing: bool = True):
        """
        Инициализация менеджера конфигурации

        Args:
            config_file: Путь к файлу конфигурации (None - только значения по умолчанию)
            enable_auditing: Вести журнал аудита
        """
        self.config_file = config_file
        self.enable_auditing = enable_auditing
        self.logger = logging.getLogger('experiment_config')
        self.audit_logger = self.setup_audit_logging()
        self.config = self.load_config()

    def load_config(self) -> ExperimentConfig:
        """
        Загрузка конфигурации эксперимента

        Returns:
            ExperimentConfig: Конфигурация
        """
        config = ExperimentConfig()
        if self.config_file is None:
            return config
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                config_data = json.load(f)
        except FileNotFoundError:
            self.logger.info(f"Файл конфигурации {self.config_file} не найден, используются значения по умолчанию")
            return config
        except json.JSONDecodeError as e:
            raise ConfigError(f"Файл конфигурации {self.config_file} поврежден: {e}")

        for key, value in config_data.items():
            if hasattr(config, key):
                setattr(config, key, value)
            else:
                self.logger.warning(f"Неизвестный параметр конфигурации: {key}")
        return config

    def save_config(self):
        """Сохранение конфигурации эксперимента"""
        if self.config_file is None:
            return
        with open(self.config_file, 'w', encoding='utf-8') as f:
            json.dump(asdict(self.config), f, ensure_ascii=False, indent=2)

    def setup_audit_logging(self) -> logging.Logger:
        """
        Настройка логирования аудита

        Returns:
            logging.Logger: Логгер аудита
        """
        logger = logging.getLogger('graphtune_audit')
        logger.setLevel(logging.INFO)

        for handler in logger.handlers[:]:
            logger.removeHandler(handler)

        formatter = logging.Formatter('%(asctime)s - AUDIT - %(message)s')
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)
        logger.propagate = False
        return logger

    def audit_event(self, event_type: AuditEventType, details: Optional[Dict[str, Any]] = None):
        """
        Логирование события аудита

        Args:
            event_type: Тип события
            details: Дополнительные детали события
        """
        if not self.enable_auditing:
            return

        event_data = {
            'timestamp': datetime.now().isoformat(),
            'event_type': event_type.value,
            'config_hash': self.config.config_hash(),
            'details': details or {}
        }
        self.audit_logger.info(json.dumps(event_data, ensure_ascii=False, default=str))

    def update_config(self, save: bool = True, **kwargs):
        """
        Обновление конфигурации эксперимента

        Args:
            save: Сохранить конфигурацию в файл
            **kwargs: Параметры конфигурации для обновления (None пропускается)
        """
        changed = {}
        for key, value in kwargs.items():
            if value is None:
                continue
            if hasattr(self.config, key):
                setattr(self.config, key, value)
                changed[key] = value
                self.logger.info(f"Конфигурация обновлена: {key} = {value}")
            else:
                self.logger.warning(f"Неизвестный параметр конфигурации: {key}")

        self.config.validate()
        if save:
            self.save_config()
        if changed:
            self.audit_event(AuditEventType.CONFIG_CHANGED, details=changed)
