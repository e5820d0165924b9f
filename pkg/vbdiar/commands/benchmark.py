"""
Команда benchmark: сравнение систем KM-PCA, VB-PLDA, VB-COS, VB-LLR и DA-VB на корпусе.
"""

import argparse
import json
import logging
from pathlib import Path

from ..config import settings
from ..der import AggregateReport, DerReport, TurnList, aggregate_reports, compute_der
from ..errors import UsageError
from ..plda import TwoCovPlda
from ..preprocess import ProjectionPipeline
from ..storage import CorpusStore
from ..systems import BENCHMARK_SYSTEMS, SystemConfig, conversation_seeds, diarize_embeddings
from .common import add_system_flags, add_workers_flag, load_inputs, map_ordered, system_config, worker_count

logger = logging.getLogger(__name__)


def register_benchmark_command(subparsers: argparse._SubParsersAction) -> None:
    """Регистрация команды benchmark."""
    parser = subparsers.add_parser("benchmark", help="Сравнить системы диаризации на корпусе")
    parser.add_argument("--corpus", type=Path, required=True, help="Каталог корпуса")
    parser.add_argument("--model", type=Path, default=None, help="Модель PLDA (по умолчанию model.json корпуса)")
    parser.add_argument("--pipeline", type=Path, default=None, help="Конвейер предобработки")
    parser.add_argument(
        "--systems",
        default=",".join(BENCHMARK_SYSTEMS),
        help=f"Системы через запятую из {', '.join(BENCHMARK_SYSTEMS)}",
    )
    parser.add_argument("--seed", type=int, default=0, help="Зерно")
    parser.add_argument("--collar", type=float, default=None, help="Полуширина воротника, с")
    parser.add_argument("--json", action="store_true", help="Отчёт в JSON")
    add_system_flags(parser)
    add_workers_flag(parser)
    parser.set_defaults(handler=run_benchmark)


def selected_systems(value: str) -> list[str]:
    names = [n.strip() for n in value.split(",") if n.strip()]
    unknown = [n for n in names if n not in BENCHMARK_SYSTEMS]
    if unknown or not names:
        raise UsageError(f"--systems: неизвестные системы {unknown}, доступны {list(BENCHMARK_SYSTEMS)}")
    return names


def evaluate_system(
    store: CorpusStore,
    model: TwoCovPlda,
    pipeline: ProjectionPipeline | None,
    config: SystemConfig,
    seed: int,
    collar: float,
    workers: int = 1,
) -> AggregateReport:
    """DER системы по всем разговорам корпуса."""
    recordings = store.recording_ids()
    seeds = conversation_seeds(seed, len(recordings))

    def score_one(item: tuple[str, int]) -> DerReport:
        rec, conv_seed = item
        segments, embeddings = store.read_embeddings(rec)
        output = diarize_embeddings(model, embeddings, config, conv_seed, pipeline=pipeline)
        hypothesis = TurnList.from_labels(rec, segments, output.labels.tolist())
        return compute_der(store.read_reference(rec), hypothesis, collar)

    return aggregate_reports(map_ordered(score_one, zip(recordings, seeds), workers))


def format_table(results: dict[str, AggregateReport]) -> str:
    lines = [f"{'system':<10} {'mean DER (%)':>14} {'σ (%)':>8}"]
    for name, agg in results.items():
        lines.append(f"{name:<10} {100 * agg.mean_der:>14.2f} {100 * agg.std_der:>8.2f}")
    return "\n".join(lines) + "\n"


def run_benchmark(args: argparse.Namespace) -> int:
    names = selected_systems(args.systems)
    collar = settings.default_collar if args.collar is None else args.collar
    store = CorpusStore(args.corpus)
    model, pipeline = load_inputs(args.corpus, args.model, args.pipeline)
    workers = worker_count(args)

    results: dict[str, AggregateReport] = {}
    for name in names:
        preset = BENCHMARK_SYSTEMS[name]
        config = system_config(args, preset.method, preset.init)
        results[name] = evaluate_system(store, model, pipeline, config, args.seed, collar, workers)
        logger.info(f"{name}: mean DER {100 * results[name].mean_der:.2f}%")

    if args.json:
        # Системы идут в запрошенном порядке, как строки таблицы
        payload = {
            "format_version": settings.format_version,
            "systems": {name: agg.model_dump() for name, agg in results.items()},
        }
        print(json.dumps(payload, indent=2))
    else:
        print(format_table(results), end="")
    return 0
