"""
Команда score: DER по каталогам эталона и гипотез.
"""

import argparse
import json
import logging
from pathlib import Path

from ..config import settings
from ..der import AggregateReport, DerReport, TurnList, aggregate_reports, compute_der
from ..errors import DataFormatError
from ..storage import read_rttm
from .common import add_workers_flag, map_ordered, worker_count

logger = logging.getLogger(__name__)


def register_score_command(subparsers: argparse._SubParsersAction) -> None:
    """Регистрация команды score."""
    parser = subparsers.add_parser("score", help="Вычислить DER гипотез")
    parser.add_argument("--ref", type=Path, required=True, help="Каталог эталонных RTTM")
    parser.add_argument("--hyp", type=Path, required=True, help="Каталог гипотез RTTM")
    parser.add_argument("--collar", type=float, default=None, help="Полуширина воротника, с")
    parser.add_argument("--json", action="store_true", help="Отчёт в JSON")
    add_workers_flag(parser)
    parser.set_defaults(handler=run_score)


def reference_ids(directory: Path) -> list[str]:
    """
    Записи эталона: файлы *.rttm каталога в порядке имён.

    Raises:
        DataFormatError: Нет каталога или файлов
    """
    if not directory.is_dir():
        raise DataFormatError(f"{directory}: каталог не найден")
    ids = sorted(p.stem for p in directory.glob("*.rttm"))
    if not ids:
        raise DataFormatError(f"{directory}: нет файлов RTTM")
    return ids


def score_directories(ref_dir: Path, hyp_dir: Path, collar: float, workers: int = 1) -> list[DerReport]:
    """Отчёты DER по всем записям эталона; отсутствующая гипотеза — ошибка данных."""

    def score_one(rec: str) -> DerReport:
        reference = read_rttm(ref_dir / f"{rec}.rttm", rec)
        hyp_path = hyp_dir / f"{rec}.rttm"
        if not hyp_path.exists():
            raise DataFormatError(f"{hyp_path}: нет гипотезы для записи {rec}")
        hypothesis: TurnList = read_rttm(hyp_path, rec)
        return compute_der(reference, hypothesis, collar)

    return map_ordered(score_one, reference_ids(ref_dir), workers)


def format_table(reports: list[DerReport], aggregate: AggregateReport) -> str:
    """Человекочитаемая таблица: DER по записям и сводка в процентах."""
    lines = [f"{'recording':<16} {'scored':>10} {'miss':>8} {'fa':>8} {'spkerr':>8} {'DER%':>8}"]
    for r in reports:
        lines.append(
            f"{r.recording_id:<16} {r.scored_time:>10.3f} {r.miss_time:>8.3f} "
            f"{r.false_alarm_time:>8.3f} {r.speaker_error_time:>8.3f} {100 * r.der:>8.2f}"
        )
    lines.append(f"mean DER (%) {100 * aggregate.mean_der:.2f}")
    lines.append(f"σ (%)        {100 * aggregate.std_der:.2f}")
    return "\n".join(lines) + "\n"


def format_json(reports: list[DerReport], aggregate: AggregateReport) -> str:
    payload = {
        "format_version": settings.format_version,
        "recordings": [r.model_dump() for r in reports],
        "aggregate": aggregate.model_dump(),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def run_score(args: argparse.Namespace) -> int:
    collar = settings.default_collar if args.collar is None else args.collar
    reports = score_directories(args.ref, args.hyp, collar, worker_count(args))
    aggregate = aggregate_reports(reports)
    text = format_json(reports, aggregate) if args.json else format_table(reports, aggregate)
    print(text, end="")
    logger.info(f"Оценено {aggregate.num_recordings} записей, mean DER {100 * aggregate.mean_der:.2f}%")
    return 0
