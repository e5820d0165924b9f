"""
Системы диаризации: сборка предобработки, инициализации и вывода.

Метод vb — VB с β = 1, vb-da — VB с отжигом, kmeans-pca — базовая система.
Инициализация VB: random (случайное q), cos и llr (эвристика трёх
дикторов с косинусной метрикой или PLDA-LLR).
"""

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .baseline import km_pca_diarize
from .initialization import HeuristicInit, InitStrategy, RandomInit, heuristic_pair_init, random_init
from .plda import TwoCovPlda
from .preprocess import ProjectionPipeline
from .vb import AnnealSchedule, ConvergenceConfig, VbTrace, map_assignment, run_vb

logger = logging.getLogger(__name__)

Method = Literal["vb", "vb-da", "kmeans-pca"]
InitName = Literal["random", "cos", "llr"]

METRICS = {"cos": "cosine", "llr": "plda_llr"}


class SystemConfig(BaseModel):
    """Параметры одной системы диаризации."""

    model_config = ConfigDict(frozen=True)

    method: Method = "vb"
    init: InitName = "random"
    num_speakers: int = Field(default=2, gt=0, description="Число дикторов в разговоре")
    convergence: ConvergenceConfig = Field(default_factory=ConvergenceConfig)
    schedule: AnnealSchedule = Field(default_factory=AnnealSchedule)
    attempts: int = Field(default=10, ge=1, description="Попыток эвристики трёх дикторов")
    restarts: int = Field(default=10, ge=1, description="Перезапусков k-means")

    @model_validator(mode="after")
    def check_heuristic(self) -> "SystemConfig":
        if self.init != "random" and self.method != "kmeans-pca" and self.num_speakers != 2:
            raise ValueError(f"init={self.init} выбирает пару дикторов, num_speakers должно быть 2")
        return self


# Системы сравнительной таблицы: имя → конфигурация
BENCHMARK_SYSTEMS: dict[str, SystemConfig] = {
    "KM-PCA": SystemConfig(method="kmeans-pca"),
    "VB-PLDA": SystemConfig(method="vb", init="random"),
    "VB-COS": SystemConfig(method="vb", init="cos"),
    "VB-LLR": SystemConfig(method="vb", init="llr"),
    "DA-VB": SystemConfig(method="vb-da", init="random"),
}


@dataclass
class SystemOutput:
    """Разметка сегментов и диагностика прогона."""

    labels: NDArray[np.int64]
    trace: list[VbTrace] = field(default_factory=list)
    converged: bool | None = None
    iterations: int = 0


def conversation_seeds(seed: int, count: int) -> list[int]:
    """Целочисленные подсемена разговоров: SeedSequence(seed).spawn(count)."""
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(count)]


def init_strategy(config: SystemConfig, seed: int) -> InitStrategy:
    """Начальное приближение VB для конфигурации системы."""
    if config.init == "random":
        return RandomInit(num_speakers=config.num_speakers, seed=seed)
    return HeuristicInit(metric=METRICS[config.init], attempts=config.attempts, seed=seed)


def diarize_embeddings(
    model: TwoCovPlda,
    embeddings,
    config: SystemConfig,
    seed: int,
    pipeline: ProjectionPipeline | None = None,
    trace: bool = False,
) -> SystemOutput:
    """
    Разметить сегменты одного разговора.

    Args:
        model: PLDA-модель в пространстве после конвейера
        embeddings: Вложения сегментов (M, D)
        config: Метод, инициализация и критерии останова
        seed: Зерно разговора
        pipeline: Конвейер предобработки для VB; базовая система его не использует
        trace: Записывать ли трассу VB

    Returns:
        SystemOutput
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if config.method == "kmeans-pca":
        return SystemOutput(labels=km_pca_diarize(x, seed=seed, k=config.num_speakers, restarts=config.restarts))

    if pipeline is not None:
        x = pipeline.apply_many(x)
    schedule = config.schedule if config.method == "vb-da" else None
    strategy = init_strategy(config, seed)
    if isinstance(strategy, RandomInit):
        init = random_init(x.shape[0], strategy.num_speakers, strategy.seed)
    else:
        init = heuristic_pair_init(model, x, strategy).posteriors
    result = run_vb(model, x, init, schedule=schedule, config=config.convergence, trace=trace)
    if not result.converged:
        logger.info(f"VB не сошёлся за {config.convergence.max_iterations} проходов")
    return SystemOutput(
        labels=np.asarray(map_assignment(result.state), dtype=np.int64),
        trace=result.trace,
        converged=result.converged,
        iterations=result.state.iteration,
    )
