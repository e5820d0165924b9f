"""
Команда diarize: разметка всех разговоров корпуса одной системой.
"""

import argparse
import logging
from pathlib import Path

from ..der import TurnList
from ..storage import CorpusStore, write_rttm, write_trace
from ..systems import conversation_seeds, diarize_embeddings
from .common import add_system_flags, add_workers_flag, load_inputs, map_ordered, system_config, worker_count

logger = logging.getLogger(__name__)

TRACES = "traces"


def register_diarize_command(subparsers: argparse._SubParsersAction) -> None:
    """Регистрация команды diarize."""
    parser = subparsers.add_parser("diarize", help="Разметить разговоры корпуса")
    parser.add_argument("--corpus", type=Path, required=True, help="Каталог корпуса")
    parser.add_argument("--out", type=Path, required=True, help="Каталог гипотез RTTM")
    parser.add_argument("--model", type=Path, default=None, help="Модель PLDA (по умолчанию model.json корпуса)")
    parser.add_argument("--pipeline", type=Path, default=None, help="Конвейер предобработки")
    parser.add_argument("--method", choices=["vb", "vb-da", "kmeans-pca"], default="vb", help="Метод")
    parser.add_argument(
        "--init", choices=["random", "cos", "llr"], default=None, help="Инициализация VB (по умолчанию random)"
    )
    parser.add_argument("--seed", type=int, default=0, help="Зерно")
    add_system_flags(parser)
    add_workers_flag(parser)
    parser.set_defaults(handler=run_diarize)


def run_diarize(args: argparse.Namespace) -> int:
    if args.method == "kmeans-pca" and args.init is not None:
        logger.warning(f"--init {args.init} не используется методом kmeans-pca")
    config = system_config(args, args.method, args.init or "random")
    store = CorpusStore(args.corpus)
    model, pipeline = load_inputs(args.corpus, args.model, args.pipeline)
    recordings = store.recording_ids()
    seeds = conversation_seeds(args.seed, len(recordings))
    with_trace = config.method != "kmeans-pca"

    def process(item: tuple[str, int]) -> int:
        rec, seed = item
        segments, embeddings = store.read_embeddings(rec)
        output = diarize_embeddings(model, embeddings, config, seed, pipeline=pipeline, trace=with_trace)
        write_rttm(args.out / f"{rec}.rttm", TurnList.from_labels(rec, segments, output.labels.tolist()))
        if with_trace:
            write_trace(args.out / TRACES / f"{rec}.jsonl", output.trace)
        return len(segments)

    counts = map_ordered(process, zip(recordings, seeds), worker_count(args))
    logger.info(f"Размечено {len(recordings)} разговоров, {sum(counts)} сегментов: {args.out}")
    return 0
