"""
Команда train-plda: EM-обучение PLDA и, при необходимости, конвейера предобработки.
"""

import argparse
import logging
from pathlib import Path

from ..errors import UsageError
from ..plda import train_em
from ..preprocess import DEFAULT_LDA_DIM, ProjectionPipeline
from ..storage import read_training_set, save_model, save_pipeline

logger = logging.getLogger(__name__)


def register_train_command(subparsers: argparse._SubParsersAction) -> None:
    """Регистрация команды train-plda."""
    parser = subparsers.add_parser("train-plda", help="Обучить двухковариационную PLDA")
    parser.add_argument("--train", type=Path, required=True, help="Обучающий набор JSON Lines")
    parser.add_argument("--out", type=Path, required=True, help="Файл модели")
    parser.add_argument("--iterations", type=int, default=10, help="Итераций EM (≥ 1)")
    parser.add_argument(
        "--pipeline", type=Path, default=None, help="Обучить конвейер и сохранить его в этот файл"
    )
    parser.add_argument(
        "--lda-dim",
        type=int,
        default=None,
        help=f"Размерность LDA (требует --pipeline); по умолчанию min({DEFAULT_LDA_DIM}, D, дикторов − 1)",
    )
    parser.add_argument(
        "--no-length-norm", action="store_true", help="Не нормировать длину после отбеливания"
    )
    parser.set_defaults(handler=run_train)


def run_train(args: argparse.Namespace) -> int:
    if args.iterations < 1:
        raise UsageError(f"--iterations: должно быть ≥ 1, получено {args.iterations}")
    if args.lda_dim is not None and args.pipeline is None:
        raise UsageError("--lda-dim: требуется --pipeline")

    data = read_training_set(args.train)
    if args.pipeline is not None:
        lda_dim = args.lda_dim
        if lda_dim is None:
            speakers = len({speaker for speaker, _ in data})
            lda_dim = min(DEFAULT_LDA_DIM, len(data[0][1]), speakers - 1)
            logger.info(f"Размерность LDA по умолчанию: {lda_dim}")
        pipeline = ProjectionPipeline.fit(
            data, lda_dim=lda_dim, length_normalize=not args.no_length_norm
        )
        transformed = pipeline.apply_many([v for _, v in data])
        data = [(s, v) for (s, _), v in zip(data, transformed)]
        save_pipeline(args.pipeline, pipeline)

    result = train_em(data, args.iterations)
    save_model(args.out, result.model)
    logger.info(
        f"PLDA обучена: log-правдоподобие {result.log_likelihoods[0]:.3f} -> {result.log_likelihoods[-1]:.3f}"
    )
    return 0
