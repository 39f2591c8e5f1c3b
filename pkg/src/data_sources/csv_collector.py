#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль чтения наборов данных в формате CSV (USPS и синтетические наборы).
Первый столбец - метка класса, остальные - признаки.
"""

import logging

import numpy as np
import pandas as pd

from exceptions import FormatError
from graph_core import Dataset


class CsvCollector:
    """
    Класс для загрузки и сохранения наборов данных в CSV
    """

    def __init__(self, label_column: int = 0):
        """
        Инициализация сборщика CSV

        Args:
            label_column: Номер столбца с меткой класса
        """
        self.label_column = label_column
        self.logger = logging.getLogger('data_sources.csv')

    def load(self, path: str) -> Dataset:
        """
        Загрузка набора данных.

        Args:
            path: Путь к CSV файлу без заголовка

        Returns:
            Dataset: Набор данных с метками классов
        """
        try:
            frame = pd.read_csv(path, header=None)
        except pd.errors.EmptyDataError:
            raise FormatError(f"Файл {path} пуст", offset=0)
        if frame.shape[1] < 2:
            raise FormatError(f"В файле {path} нет столбцов признаков", offset=0)

        numeric = frame.apply(pd.to_numeric, errors='coerce')
        bad_rows = np.flatnonzero(numeric.isna().any(axis=1).to_numpy())
        if bad_rows.size:
            raise FormatError(f"Нечисловые значения в файле {path}", offset=int(bad_rows[0]))

        labels = numeric.iloc[:, self.label_column].to_numpy()
        if not np.all(np.equal(np.mod(labels, 1), 0)):
            raise FormatError(f"Метки классов в файле {path} должны быть целыми", offset=0)
        features = numeric.drop(columns=numeric.columns[self.label_column]).to_numpy(dtype=float)
        self.logger.info(f"Загружено {features.shape[0]} строк размерности {features.shape[1]} из {path}")
        return Dataset(features, labels.astype(int))

    def write(self, dataset: Dataset, path: str):
        """Сохранение набора данных: метка, затем признаки"""
        labels = dataset.labels if dataset.labels is not None else np.zeros(dataset.n, dtype=int)
        frame = pd.DataFrame(dataset.points)
        frame.insert(0, 'label', labels)
        frame.to_csv(path, header=False, index=False)
        self.logger.info(f"Сохранено {dataset.n} строк в {path}")
