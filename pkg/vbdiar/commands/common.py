"""
Общие части команд: валидация флагов, пул потоков, флаги систем.
"""

import argparse
import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from ..config import settings
from ..errors import UsageError
from ..plda import TwoCovPlda
from ..preprocess import ProjectionPipeline
from ..storage import load_model, load_pipeline
from ..systems import SystemConfig
from ..vb import AnnealSchedule, ConvergenceConfig

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")
ModelT = TypeVar("ModelT", bound=BaseModel)


def validate(model: type[ModelT], flags: dict[str, str], **values) -> ModelT:
    """
    Собрать объект параметров из значений флагов.

    Ошибка валидации превращается в UsageError с именем флага.

    Args:
        model: Класс pydantic-модели
        flags: Поле модели → имя флага
        **values: Значения полей
    """
    try:
        return model(**values)
    except ValidationError as e:
        err = e.errors()[0]
        field = str(err["loc"][0]) if err["loc"] else ""
        flag = flags.get(field, f"--{field.replace('_', '-')}" if field else model.__name__)
        raise UsageError(f"{flag}: {err['msg']}") from e


def worker_count(args: argparse.Namespace) -> int:
    workers = args.workers if args.workers is not None else settings.workers
    if workers < 1:
        raise UsageError(f"--workers: должно быть ≥ 1, получено {workers}")
    return workers


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: int) -> list[R]:
    """Применить fn к элементам в пуле потоков; результаты в порядке элементов."""
    items = list(items)
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def add_workers_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--workers", type=int, default=None, help="Размер пула потоков (по умолчанию VBDIAR_WORKERS)"
    )


def add_system_flags(parser: argparse.ArgumentParser) -> None:
    """Флаги критериев останова, отжига и эвристики."""
    group = parser.add_argument_group("вывод")
    group.add_argument("--speakers", type=int, default=2, help="Число дикторов в разговоре")
    group.add_argument("--max-iterations", type=int, default=100, help="Максимум проходов VB")
    group.add_argument("--tolerance", type=float, default=1e-6, help="Порог max |Δq| для останова")
    group.add_argument("--beta-init", type=float, default=0.2, help="Начальная температура DA-VB")
    group.add_argument("--beta-factor", type=float, default=1.05, help="Множитель температуры DA-VB")
    group.add_argument("--attempts", type=int, default=10, help="Попыток эвристики трёх дикторов")
    group.add_argument("--restarts", type=int, default=10, help="Перезапусков k-means")


def system_config(args: argparse.Namespace, method: str, init: str) -> SystemConfig:
    """Собрать SystemConfig из флагов."""
    convergence = validate(
        ConvergenceConfig,
        {"max_iterations": "--max-iterations", "q_tolerance": "--tolerance"},
        max_iterations=args.max_iterations,
        q_tolerance=args.tolerance,
    )
    schedule = validate(
        AnnealSchedule,
        {"beta_init": "--beta-init", "factor": "--beta-factor", "": "--beta-init"},
        beta_init=args.beta_init,
        factor=args.beta_factor,
    )
    return validate(
        SystemConfig,
        {"num_speakers": "--speakers", "init": "--init", "method": "--method", "": "--init"},
        method=method,
        init=init,
        num_speakers=args.speakers,
        convergence=convergence,
        schedule=schedule,
        attempts=args.attempts,
        restarts=args.restarts,
    )


def load_inputs(
    corpus: Path, model_path: Path | None, pipeline_path: Path | None
) -> tuple[TwoCovPlda, ProjectionPipeline | None]:
    """Модель (по умолчанию model.json корпуса) и необязательный конвейер."""
    model = load_model(model_path or corpus / "model.json")
    pipeline = load_pipeline(pipeline_path) if pipeline_path else None
    if pipeline is not None and pipeline.output_dim != model.dim:
        raise UsageError(
            f"--pipeline: выход конвейера {pipeline.output_dim} не совпадает с размерностью модели {model.dim}"
        )
    return model, pipeline
