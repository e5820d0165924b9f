"""
Синтетические корпуса с известной разметкой.

Разговоры строятся по порождающей истории PLDA: один вектор на диктора,
свежий остаток на каждый сегмент. Сегменты укладываются на ось времени
встык, поэтому речь эталона покрывает всю запись без пауз.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .der import TurnList
from .errors import DimensionError, UsageError
from .plda import SpeakerPrior, TwoCovPlda, sample_conversation, sample_residuals, sample_speaker_vectors

logger = logging.getLogger(__name__)

# Опорная длительность T₀ закона масштабирования остатка, секунды
REFERENCE_DURATION = 5.0

# Длительность «полного высказывания» в обучающем наборе, секунды
FULL_UTTERANCE_DURATION = 300.0

# Границы длительности случайных нарезок обучающего набора, секунды
CUT_DURATION = (2.0, 20.0)


class IntRange(BaseModel):
    """Равномерное целое из [low, high]; low == high задаёт фиксированное значение."""

    model_config = ConfigDict(frozen=True)

    low: int = Field(gt=0)
    high: int = Field(gt=0)

    @model_validator(mode="after")
    def check_order(self) -> "IntRange":
        if self.low > self.high:
            raise ValueError(f"low={self.low} больше high={self.high}")
        return self

    def draw(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.low, self.high + 1))


class FloatRange(BaseModel):
    """Равномерное вещественное из [low, high]."""

    model_config = ConfigDict(frozen=True)

    low: float = Field(ge=0.01)
    high: float = Field(ge=0.01)

    @model_validator(mode="after")
    def check_order(self) -> "FloatRange":
        if self.low > self.high:
            raise ValueError(f"low={self.low} больше high={self.high}")
        return self

    def draw(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        return rng.uniform(self.low, self.high, size=size)


class CorpusSpec(BaseModel):
    """Параметры синтетического корпуса."""

    model_config = ConfigDict(frozen=True)

    num_conversations: int = Field(gt=0, description="Число разговоров")
    num_speakers_per_conversation: int = Field(default=2, gt=0, description="Дикторов в разговоре")
    dim: int = Field(default=10, gt=0, description="Размерность вложений D")
    segments_per_conversation: IntRange = Field(default=IntRange(low=40, high=80))
    segment_duration_seconds: FloatRange = Field(default=FloatRange(low=1.0, high=5.0))
    dominance: float = Field(
        default=0.5, ge=0.5, lt=1.0, description="Ожидаемая доля времени доминирующего диктора"
    )
    separation: float = Field(
        default=1.0, gt=0.0, description="Отношение междикторской дисперсии к внутридикторской"
    )
    duration_scaling: bool = Field(
        default=False, description="Масштабировать ковариацию остатка множителем T₀/T"
    )
    seed: int = 0

    def prior(self) -> SpeakerPrior:
        """π = (dominance, 1 − dominance) при S = 2, иначе равномерное."""
        s = self.num_speakers_per_conversation
        if s == 2:
            return SpeakerPrior(num_speakers=2, pi=(self.dominance, 1.0 - self.dominance))
        if self.dominance != 0.5:
            logger.warning(f"dominance={self.dominance} учитывается только при двух дикторах, S={s}")
        return SpeakerPrior.uniform(s)


@dataclass(eq=False)
class Conversation:
    """Один синтетический разговор: вложения сегментов, метки и времена."""

    recording_id: str
    embeddings: NDArray[np.float64]
    labels: NDArray[np.int64]
    starts: NDArray[np.float64]
    ends: NDArray[np.float64]

    @property
    def num_segments(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def segments(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.starts, self.ends)]

    @cached_property
    def reference(self) -> TurnList:
        return TurnList.from_labels(self.recording_id, self.segments, self.labels.tolist())


def make_model(dim: int, separation: float = 1.0) -> TwoCovPlda:
    """Порождающая модель: μ = 0, 𝓛⁻¹ = I, Λ⁻¹ = separation · I."""
    if dim < 1 or separation <= 0.0:
        raise UsageError(f"make_model: dim={dim} и separation={separation} должны быть положительны")
    return TwoCovPlda.from_covariances(np.zeros(dim), separation * np.eye(dim), np.eye(dim))


def residual_scale(durations: NDArray[np.float64]) -> NDArray[np.float64]:
    """Множитель ковариации остатка T₀/T для сегментов длительности T."""
    return REFERENCE_DURATION / np.asarray(durations, dtype=np.float64)


def timeline(durations: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Уложить сегменты встык с нуля; границы округлены до миллисекунд."""
    edges = np.round(np.concatenate([[0.0], np.cumsum(durations)]), 3)
    return edges[:-1], edges[1:]


def generate_conversation(
    spec: CorpusSpec, model: TwoCovPlda, index: int, seed: np.random.SeedSequence
) -> Conversation:
    """Сгенерировать разговор с номером index из его собственного подсемени."""
    timing_seed, sample_seed = seed.spawn(2)
    rng = np.random.default_rng(timing_seed)
    m = spec.segments_per_conversation.draw(rng)
    durations = spec.segment_duration_seconds.draw(rng, m)
    starts, ends = timeline(durations)
    scale = residual_scale(ends - starts) if spec.duration_scaling else 1.0
    embeddings, labels = sample_conversation(model, spec.prior(), m, sample_seed, residual_scale=scale)
    return Conversation(
        recording_id=f"conv{index:04d}",
        embeddings=embeddings,
        labels=labels,
        starts=starts,
        ends=ends,
    )


def generate_corpus(spec: CorpusSpec, model: TwoCovPlda) -> list[Conversation]:
    """
    Сгенерировать корпус разговоров.

    Подсемя разговора i — SeedSequence(spec.seed).spawn(N)[i], так что
    разговор не зависит от порядка и параллельности генерации.

    Raises:
        DimensionError: Размерность модели не совпадает с spec.dim
    """
    if model.dim != spec.dim:
        raise DimensionError(f"Размерность модели {model.dim} не совпадает с spec.dim={spec.dim}")
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.num_conversations)
    corpus = [generate_conversation(spec, model, i, s) for i, s in enumerate(seeds)]
    total = sum(c.num_segments for c in corpus)
    logger.info(f"Сгенерирован корпус: {len(corpus)} разговоров, {total} сегментов")
    return corpus


def generate_plda_training_set(
    num_speakers: int,
    cuts_per_speaker: int,
    model: TwoCovPlda,
    seed: int | np.random.SeedSequence,
    duration_scaling: bool = False,
    include_full_utterance: bool = False,
) -> list[tuple[str, NDArray[np.float64]]]:
    """
    Обучающий набор PLDA из случайных нарезок.

    На каждого диктора один вектор y и cuts_per_speaker наблюдений y + ε;
    длительность нарезки равномерна в 2–20 с и при duration_scaling
    масштабирует ковариацию остатка множителем T₀/T.

    Args:
        num_speakers: Число дикторов, не меньше 2
        cuts_per_speaker: Нарезок на диктора, не меньше 1
        model: Порождающая модель
        seed: Зерно
        duration_scaling: Включить закон масштабирования остатка
        include_full_utterance: Добавить на диктора одно наблюдение полной длины

    Returns:
        Список пар (идентификатор диктора, вектор)
    """
    if num_speakers < 2:
        raise UsageError(f"Нужно хотя бы 2 диктора, получено {num_speakers}")
    if cuts_per_speaker < 1:
        raise UsageError(f"cuts_per_speaker должно быть ≥ 1, получено {cuts_per_speaker}")
    rng = np.random.default_rng(seed)
    speakers = sample_speaker_vectors(model, num_speakers, rng)
    per_speaker = cuts_per_speaker + int(include_full_utterance)
    durations = rng.uniform(*CUT_DURATION, size=(num_speakers, per_speaker))
    if include_full_utterance:
        durations[:, 0] = FULL_UTTERANCE_DURATION
    scale = residual_scale(durations.ravel()) if duration_scaling else 1.0
    residuals = sample_residuals(model, num_speakers * per_speaker, rng, scale)
    residuals = residuals.reshape(num_speakers, per_speaker, model.dim)

    data = []
    for s in range(num_speakers):
        name = f"spk{s:05d}"
        data.extend((name, speakers[s] + residuals[s, c]) for c in range(per_speaker))
    return data
