#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Командная строка для экспериментов по подбору ширины гауссова ядра.
Подкоманды: intervals, sweep, online, synth, threshold, kappa.
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from config import LOG_FILE, LOG_LEVEL
from exceptions import GraphTuneError
from experiment_config import LABELERS, ONLINE_PROVIDERS, ConfigManager
from experiment_runner import ExperimentRunner
from labeling_engine import SolverMode
from logging_config import setup_logging

logger = logging.getLogger('bench_cli')


class BenchCli:
    """
    Класс командной строки: разбирает аргументы, собирает конфигурацию
    и передает управление запуску экспериментов.
    """

    def __init__(self):
        """Инициализация командной строки"""
        self.commands: Dict[str, Callable[[argparse.Namespace, ExperimentRunner], int]] = {}
        self.register_commands()
        self.parser = self.build_parser()

    def register_commands(self):
        """Регистрация обработчиков подкоманд"""
        self.commands["intervals"] = self.intervals_command
        self.commands["sweep"] = self.sweep_command
        self.commands["online"] = self.online_command
        self.commands["synth"] = self.synth_command
        self.commands["threshold"] = self.threshold_command
        self.commands["kappa"] = self.kappa_command

    def build_parser(self) -> argparse.ArgumentParser:
        """Парсер аргументов со всеми подкомандами"""
        parser = argparse.ArgumentParser(
            prog="graphtune",
            description="Подбор ширины σ гауссова ядра для полуконтролируемого обучения на графах"
        )
        parser.add_argument("--log-level", default=LOG_LEVEL, help="Уровень логирования")
        parser.add_argument("--log-file", default=None, help=f"Файл логов (например, {LOG_FILE})")

        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", default=None, help="JSON файл конфигурации эксперимента")
        common.add_argument("--n", type=int, default=None, help="Размер подвыборки")
        common.add_argument("--k", type=int, default=None, help="Число соседей взаимного kNN графа")
        common.add_argument("--t", type=int, default=None, help="Число итераций CG")
        common.add_argument("--mode", choices=[m.value for m in SolverMode], default=None,
                            help="Режим решателя")
        common.add_argument("--labeler", choices=LABELERS, default=None, help="Тип разметки")
        common.add_argument("--seed", type=int, default=None, help="Зерно генератора")
        common.add_argument("--out", default=None, help="Каталог результатов")

        subparsers = parser.add_subparsers(dest="command", required=True)
        subparsers.add_parser("intervals", parents=[common], help="Поиск интервалов постоянства потерь")
        subparsers.add_parser("sweep", parents=[common], help="Кривые точности по сетке σ")

        online = subparsers.add_parser("online", parents=[common], help="Онлайн подбор σ (Exp3-Set)")
        online.add_argument("--rounds", type=int, default=None, help="Число раундов T")
        online.add_argument("--provider", choices=ONLINE_PROVIDERS, default=None,
                            help="Поставщик обратной связи")

        synth = subparsers.add_parser("synth", parents=[common], help="Синтетический набор в CSV")
        synth.add_argument("--separation", type=float, default=None, help="Расстояние между центрами облаков")
        synth.add_argument("--noise", type=float, default=None, help="Стандартное отклонение шума")
        synth.add_argument("--path", default=None, help="Путь к CSV файлу")

        subparsers.add_parser("threshold", parents=[common], help="Развертка порогового семейства G(k, r)")
        subparsers.add_parser("kappa", parents=[common], help="Число обусловленности как функция σ")
        return parser

    def load_config(self, args: argparse.Namespace) -> ConfigManager:
        """
        Конфигурация из файла с переопределениями из командной строки.

        Args:
            args: Разобранные аргументы

        Returns:
            ConfigManager: Менеджер с итоговой конфигурацией
        """
        manager = ConfigManager(config_file=args.config)
        overrides = {
            'n': args.n,
            'k': args.k,
            't': args.t,
            'mode': args.mode,
            'labeler': args.labeler,
            'seed': args.seed,
            'output_dir': args.out,
            'rounds': getattr(args, 'rounds', None),
            'online_provider': getattr(args, 'provider', None),
            'separation': getattr(args, 'separation', None),
            'noise': getattr(args, 'noise', None),
        }
        manager.update_config(save=False, **overrides)
        return manager

    def intervals_command(self, args: argparse.Namespace, runner: ExperimentRunner) -> int:
        table, _ = runner.run_interval_experiment()
        for row in table.rows:
            if row.status == "ok":
                print(f"seed={row.seed} M={row.intervals} TpI={row.tpi:.4f}s accuracy={row.optimal_accuracy:.4f}")
            else:
                print(f"seed={row.seed} ошибка: {row.error}")
        mean_tpi = table.mean_tpi()
        if mean_tpi is not None:
            print(f"{runner.method_name()}: средний TpI {mean_tpi:.4f} с")
        return 0 if table.completed() else 1

    def sweep_command(self, args: argparse.Namespace, runner: ExperimentRunner) -> int:
        frame = runner.run_accuracy_sweep()
        for (mode, t), curve in frame.groupby(['mode', 't'], sort=True):
            best = curve.loc[curve['accuracy'].idxmax()]
            print(f"{mode} t={t}: лучшая точность {best['accuracy']:.4f} при σ={best['sigma']:.3f}")
        return 0

    def online_command(self, args: argparse.Namespace, runner: ExperimentRunner) -> int:
        record, _ = runner.run_online_experiment()
        print(f"раундов {record.total_rounds}, шаг λ={record.step:.4g}, кусков плотности {record.piece_count}")
        if record.regret is not None:
            print(f"регрет {record.regret:.4f}, средний {record.average_regret:.4f}, лучшее σ={record.best_parameter:.4f}")
        return 0

    def synth_command(self, args: argparse.Namespace, runner: ExperimentRunner) -> int:
        path = runner.write_synthetic_dataset(args.path)
        print(f"синтетический набор сохранен в {path}")
        return 0

    def threshold_command(self, args: argparse.Namespace, runner: ExperimentRunner) -> int:
        frame = runner.run_threshold_sweep()
        if not frame.empty:
            best = frame.loc[frame['loss'].idxmin()]
            print(f"порогов {len(frame)}, лучшая потеря {best['loss']:.4f} при r={best['r']:.4f}")
        return 0

    def kappa_command(self, args: argparse.Namespace, runner: ExperimentRunner) -> int:
        frame = runner.run_condition_sweep()
        if not frame.empty:
            print(f"κ от {frame['kappa'].min():.3f} до {frame['kappa'].max():.3f} на {len(frame)} точках σ")
        return 0

    def run(self, argv: Optional[List[str]] = None) -> int:
        """
        Разбор аргументов и выполнение подкоманды.

        Args:
            argv: Аргументы (по умолчанию sys.argv[1:])

        Returns:
            int: Код завершения
        """
        args = self.parser.parse_args(argv)
        setup_logging(args.log_level, args.log_file)
        try:
            manager = self.load_config(args)
            runner = ExperimentRunner(manager.config, config_manager=manager)
            return self.commands[args.command](args, runner)
        except GraphTuneError as e:
            logger.error(f"Команда {args.command} завершилась ошибкой: {e}")
            print(f"Ошибка: {e}", file=sys.stderr)
            return 1


def main(argv: Optional[List[str]] = None) -> int:
    return BenchCli().run(argv)


if __name__ == "__main__":
    sys.exit(main())
