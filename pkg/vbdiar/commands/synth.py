"""
Команда synth: синтетический корпус на диске.
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from ..errors import UsageError
from ..storage import CorpusStore, write_training_set
from ..synth import CorpusSpec, FloatRange, IntRange, generate_corpus, generate_plda_training_set, make_model
from .common import validate

logger = logging.getLogger(__name__)

# Ключ ветви зерна для обучающего набора, чтобы он не совпадал с подсеменами разговоров
TRAIN_SEED_BRANCH = 1

FLAGS = {
    "num_conversations": "--conversations",
    "num_speakers_per_conversation": "--speakers",
    "dim": "--dim",
    "dominance": "--dominance",
    "separation": "--separation",
    "seed": "--seed",
}


def register_synth_command(subparsers: argparse._SubParsersAction) -> None:
    """Регистрация команды synth."""
    parser = subparsers.add_parser("synth", help="Сгенерировать синтетический корпус")
    parser.add_argument("--out", type=Path, required=True, help="Каталог корпуса")
    parser.add_argument("--conversations", type=int, default=10, help="Число разговоров")
    parser.add_argument("--speakers", type=int, default=2, help="Дикторов в разговоре")
    parser.add_argument("--dim", type=int, default=10, help="Размерность вложений")
    parser.add_argument("--min-segments", type=int, default=40, help="Минимум сегментов в разговоре")
    parser.add_argument("--max-segments", type=int, default=80, help="Максимум сегментов в разговоре")
    parser.add_argument("--min-duration", type=float, default=1.0, help="Минимальная длительность сегмента, с")
    parser.add_argument("--max-duration", type=float, default=5.0, help="Максимальная длительность сегмента, с")
    parser.add_argument("--dominance", type=float, default=0.5, help="Доля времени доминирующего диктора")
    parser.add_argument("--separation", type=float, default=1.0, help="Разнесённость дикторов")
    parser.add_argument("--duration-scaling", action="store_true", help="Шум остатка зависит от длительности")
    parser.add_argument("--seed", type=int, default=0, help="Зерно")
    parser.add_argument("--force", action="store_true", help="Перезаписать непустой каталог")
    parser.add_argument(
        "--train-speakers", type=int, default=0, help="Дикторов обучающего набора PLDA (0 — не создавать)"
    )
    parser.add_argument("--cuts-per-speaker", type=int, default=10, help="Нарезок на диктора")
    parser.add_argument("--full-utterance", action="store_true", help="Добавить наблюдение полной длины")
    parser.set_defaults(handler=run_synth)


def run_synth(args: argparse.Namespace) -> int:
    segments = validate(
        IntRange,
        {"low": "--min-segments", "high": "--max-segments", "": "--min-segments"},
        low=args.min_segments,
        high=args.max_segments,
    )
    durations = validate(
        FloatRange,
        {"low": "--min-duration", "high": "--max-duration", "": "--min-duration"},
        low=args.min_duration,
        high=args.max_duration,
    )
    spec = validate(
        CorpusSpec,
        FLAGS,
        num_conversations=args.conversations,
        num_speakers_per_conversation=args.speakers,
        dim=args.dim,
        segments_per_conversation=segments,
        segment_duration_seconds=durations,
        dominance=args.dominance,
        separation=args.separation,
        duration_scaling=args.duration_scaling,
        seed=args.seed,
    )
    if args.train_speakers < 0 or args.train_speakers == 1:
        raise UsageError(f"--train-speakers: ожидалось 0 или не меньше 2, получено {args.train_speakers}")
    if args.train_speakers and args.cuts_per_speaker < 1:
        raise UsageError(f"--cuts-per-speaker: ожидалось не меньше 1, получено {args.cuts_per_speaker}")

    # Всё генерируется до первой записи на диск
    model = make_model(spec.dim, spec.separation)
    corpus = generate_corpus(spec, model)
    data = None
    if args.train_speakers:
        data = generate_plda_training_set(
            args.train_speakers,
            args.cuts_per_speaker,
            model,
            np.random.SeedSequence([spec.seed, TRAIN_SEED_BRANCH]),
            duration_scaling=spec.duration_scaling,
            include_full_utterance=args.full_utterance,
        )

    store = CorpusStore(args.out)
    store.prepare(force=args.force)
    store.write(spec, model, corpus)
    if data is not None:
        write_training_set(store.root / store.TRAIN, data)
        logger.info(f"Обучающий набор: {len(data)} векторов")
    return 0
