# config.py
import os

# Настройки логирования
LOG_LEVEL = "INFO"
LOG_FILE = "graphtune.log"

# Диапазон ширины гауссова ядра
SIGMA_MAX = 7.0
SIGMA_MIN_DEFAULTS = {
    "mnist": 1.0,
    "fashion": 1.0,
    "usps": 0.4,
    "synthetic": 1.0,
    "direct": 2.0,  # полное обращение матрицы
}

# Полная матрица расстояний кэшируется только до этого размера
DISTANCE_CACHE_CAP = 4096

# Версия схемы CSV/JSON результатов
SCHEMA_VERSION = 1

# Переменная окружения, ограничивающая число потоков
THREADS_ENV_VAR = "GRAPHTUNE_THREADS"


def worker_count(requested=None):
    """
    Количество рабочих потоков с учетом GRAPHTUNE_THREADS.

    Args:
        requested: Явно запрошенное количество (None - по умолчанию)

    Returns:
        int: Количество потоков, не меньше 1
    """
    limit = os.getenv(THREADS_ENV_VAR)
    available = os.cpu_count() or 1
    if limit:
        try:
            available = max(1, int(limit))
        except ValueError:
            pass
    if requested is None or requested <= 0:
        return available
    return max(1, min(int(requested), available))


def default_sigma_min(source, solver_mode="cg"):
    """Нижняя граница σ по умолчанию для источника данных и режима решателя."""
    if solver_mode == "direct":
        return SIGMA_MIN_DEFAULTS["direct"]
    return SIGMA_MIN_DEFAULTS.get(source, 1.0)
