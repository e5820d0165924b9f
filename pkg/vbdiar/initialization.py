"""
Начальные приближения для VB.

- Случайные сегментные апостериорные q (строки из симметричного Дирихле)
- Эвристика трёх дикторов: несколько попыток по четыре прохода VB с тремя
  провизорными дикторами, из каждой берётся самая удалённая пара средних;
  итог — пара с наибольшим расстоянием по всем попыткам.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Annotated, Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from .errors import NumericalError, UsageError
from .linalg import as_matrix
from .plda import TwoCovPlda, llr_same_speaker
from .vb import ConvergenceConfig, SpeakerPosteriors, run_vb

logger = logging.getLogger(__name__)

# Число провизорных дикторов эвристики
PROVISIONAL_SPEAKERS = 3

SeedLike = int | np.random.SeedSequence


class RandomInit(BaseModel):
    """Случайная инициализация q с заданным числом дикторов."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["random"] = "random"
    num_speakers: int = Field(default=2, gt=0)
    seed: int = 0


class HeuristicInit(BaseModel):
    """Эвристика трёх дикторов с выбором пары по метрике."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["heuristic"] = "heuristic"
    metric: Literal["cosine", "plda_llr"] = "cosine"
    attempts: int = Field(default=10, ge=1, description="Число попыток со случайным стартом")
    vb_iterations: int = Field(default=4, ge=1, description="Проходов VB в каждой попытке")
    seed: int = 0


InitStrategy = Annotated[RandomInit | HeuristicInit, Field(discriminator="kind")]


def random_init(num_segments: int, num_speakers: int, seed: SeedLike) -> NDArray[np.float64]:
    """
    Случайная стохастическая по строкам матрица (M, S) со строго положительными элементами.

    Строки нормированных гамма-величин, т.е. равномерный Дирихле.
    """
    if num_segments < 1 or num_speakers < 1:
        raise UsageError(f"random_init: M={num_segments}, S={num_speakers} должны быть ≥ 1")
    rng = np.random.default_rng(seed)
    gamma = rng.gamma(1.0, size=(num_segments, num_speakers))
    # Гамма-величина может оказаться нулём лишь при потере точности
    gamma = np.maximum(gamma, np.finfo(np.float64).tiny)
    return gamma / gamma.sum(axis=1, keepdims=True)


def cosine_similarity(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        return float("nan")
    return float(a @ b) / denom


def pair_similarity(
    model: TwoCovPlda, metric: str, a: NDArray[np.float64], b: NDArray[np.float64]
) -> float:
    """Сходство средних пары дикторов: меньше — значит дальше."""
    if metric == "cosine":
        return cosine_similarity(a, b)
    if metric == "plda_llr":
        return llr_same_speaker(model, a, b)
    raise UsageError(f"Неизвестная метрика: {metric}")


@dataclass
class HeuristicResult:
    """Выбранная пара апостериорных дикторов и диагностика попыток."""

    posteriors: SpeakerPosteriors
    attempt: int
    pair: tuple[int, int]
    score: float
    candidate_scores: list[list[float]] = field(default_factory=list)
    degenerate_attempts: list[int] = field(default_factory=list)


def heuristic_pair_init(
    model: TwoCovPlda,
    embeddings,
    strategy: HeuristicInit,
) -> HeuristicResult:
    """
    Эвристика трёх дикторов.

    Попытка a использует подсемя SeedSequence(seed).spawn(attempts)[a]: случайное q
    с тремя дикторами, ровно vb_iterations проходов VB при β = 1, оценка трёх пар
    средних по метрике. Возвращается пара с наименьшим сходством по всем попыткам;
    при равенстве побеждает более ранняя попытка, затем более ранняя пара.

    Raises:
        UsageError: Меньше двух сегментов
        NumericalError: Нечисловое значение метрики
    """
    x = as_matrix(embeddings, model.dim, "embeddings")
    if x.shape[0] < 2:
        raise UsageError(f"Эвристика требует хотя бы 2 сегмента, получено {x.shape[0]}")
    config = ConvergenceConfig(max_iterations=strategy.vb_iterations, q_tolerance=0.0)
    pairs = list(itertools.combinations(range(PROVISIONAL_SPEAKERS), 2))
    seeds = np.random.SeedSequence(strategy.seed).spawn(strategy.attempts)

    best: tuple[float, int, int] | None = None
    best_posteriors: SpeakerPosteriors | None = None
    all_scores: list[list[float]] = []
    degenerate: list[int] = []
    for attempt, child in enumerate(seeds):
        q0 = random_init(x.shape[0], PROVISIONAL_SPEAKERS, child)
        state = run_vb(model, x, q0, config=config).state
        mass = state.q.sum(axis=0)
        if np.any(mass < 1.0):
            degenerate.append(attempt)
            logger.warning(
                f"Попытка {attempt}: провизорный диктор с массой {mass.min():.3f} < 1 сегмента"
            )
        scores = []
        for p, (i, j) in enumerate(pairs):
            score = pair_similarity(model, strategy.metric, state.speaker_means[i], state.speaker_means[j])
            if not np.isfinite(score):
                raise NumericalError(f"Попытка {attempt}: нечисловое значение метрики для пары ({i}, {j})")
            scores.append(score)
            if best is None or score < best[0]:
                best = (score, attempt, p)
                best_posteriors = SpeakerPosteriors(
                    means=state.speaker_means[[i, j]].copy(),
                    precisions=state.speaker_precisions[[i, j]].copy(),
                )
        all_scores.append(scores)

    score, attempt, p = best
    logger.debug(f"Эвристика ({strategy.metric}): попытка {attempt}, пара {pairs[p]}, сходство {score:.4f}")
    return HeuristicResult(
        posteriors=best_posteriors,
        attempt=attempt,
        pair=pairs[p],
        score=score,
        candidate_scores=all_scores,
        degenerate_attempts=degenerate,
    )
