#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Модуль чтения и записи файлов формата IDX (MNIST, FashionMNIST).
Изображения: magic 0x00000803, число, строки, столбцы, затем байты пикселей.
Метки: magic 0x00000801, число, затем байты меток. Все целые big-endian.
"""

import gzip
import logging
import struct
from typing import Tuple

import numpy as np

from exceptions import FormatError
from graph_core import Dataset

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxCollector:
    """
    Класс для загрузки наборов изображений в формате IDX
    """

    def __init__(self):
        """Инициализация сборщика IDX"""
        self.logger = logging.getLogger('data_sources.idx')

    @staticmethod
    def _read_bytes(path: str) -> bytes:
        opener = gzip.open if str(path).endswith('.gz') else open
        with opener(path, 'rb') as f:
            return f.read()

    @staticmethod
    def _write_bytes(path: str, payload: bytes):
        opener = gzip.open if str(path).endswith('.gz') else open
        with opener(path, 'wb') as f:
            f.write(payload)

    def parse_images(self, data: bytes) -> np.ndarray:
        """
        Разбор файла изображений.

        Args:
            data: Содержимое файла

        Returns:
            np.ndarray: Массив uint8 формы (число, строки, столбцы)
        """
        if len(data) < 16:
            raise FormatError("Заголовок файла изображений обрезан", offset=len(data))
        magic, count, rows, cols = struct.unpack_from('>IIII', data, 0)
        if magic != IMAGES_MAGIC:
            raise FormatError(f"Неверное магическое число изображений 0x{magic:08x}", offset=0)
        expected = 16 + count * rows * cols
        if len(data) < expected:
            raise FormatError(
                f"Файл изображений обрезан: ожидалось {expected} байт, получено {len(data)}",
                offset=len(data)
            )
        pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
        return pixels.reshape(count, rows, cols)

    def parse_labels(self, data: bytes) -> np.ndarray:
        """
        Разбор файла меток.

        Args:
            data: Содержимое файла

        Returns:
            np.ndarray: Метки uint8
        """
        if len(data) < 8:
            raise FormatError("Заголовок файла меток обрезан", offset=len(data))
        magic, count = struct.unpack_from('>II', data, 0)
        if magic != LABELS_MAGIC:
            raise FormatError(f"Неверное магическое число меток 0x{magic:08x}", offset=0)
        if len(data) < 8 + count:
            raise FormatError(
                f"Файл меток обрезан: ожидалось {8 + count} байт, получено {len(data)}",
                offset=len(data)
            )
        return np.frombuffer(data, dtype=np.uint8, count=count, offset=8).copy()

    def load(self, images_path: str, labels_path: str) -> Dataset:
        """
        Загрузка изображений и меток. Пиксели разворачиваются построчно
        и масштабируются в [0, 1].

        Args:
            images_path: Путь к файлу изображений (.gz допускается)
            labels_path: Путь к файлу меток

        Returns:
            Dataset: Набор данных с метками классов
        """
        images = self.parse_images(self._read_bytes(images_path))
        labels = self.parse_labels(self._read_bytes(labels_path))
        if images.shape[0] != labels.shape[0]:
            # Смещение поля числа меток в заголовке
            raise FormatError(
                f"Число изображений ({images.shape[0]}) не совпадает с числом меток ({labels.shape[0]})",
                offset=4
            )
        points = images.reshape(images.shape[0], -1).astype(float) / 255.0
        self.logger.info(f"Загружено {points.shape[0]} изображений размерности {points.shape[1]} из {images_path}")
        return Dataset(points, labels.astype(int))

    def write(self, images_path: str, labels_path: str, images, labels):
        """
        Запись изображений и меток в формате IDX.

        Args:
            images_path: Путь к файлу изображений
            labels_path: Путь к файлу меток
            images: Массив uint8 формы (число, строки, столбцы)
            labels: Метки uint8
        """
        images = np.asarray(images, dtype=np.uint8)
        labels = np.asarray(labels, dtype=np.uint8).ravel()
        if images.ndim != 3:
            raise FormatError(f"Ожидался трехмерный массив изображений, получено измерений: {images.ndim}")
        count, rows, cols = images.shape
        self._write_bytes(images_path, struct.pack('>IIII', IMAGES_MAGIC, count, rows, cols) + images.tobytes())
        self._write_bytes(labels_path, struct.pack('>II', LABELS_MAGIC, labels.shape[0]) + labels.tobytes())
        self.logger.info(f"Записано {count} изображений в {images_path}")


def load_idx(images_path: str, labels_path: str) -> Dataset:
    return IdxCollector().load(images_path, labels_path)


def write_idx(images_path: str, labels_path: str, images, labels):
    IdxCollector().write(images_path, labels_path, images, labels)
