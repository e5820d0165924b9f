"""
Оценка диаризации: DER с воротниками вокруг границ эталона.

Времена считаются точной интервальной арифметикой: ось времени режется
на элементарные интервалы по всем границам реплик и воротников, каждый
интервал классифицируется по своей середине.
"""

import itertools
import logging
import math
from collections.abc import Sequence

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    computed_field,
    field_validator,
    model_validator,
)
from scipy.optimize import linear_sum_assignment

from .config import settings
from .errors import DataFormatError, UsageError

logger = logging.getLogger(__name__)

# Допуск на касание соседних реплик
TOUCH_TOLERANCE = 1e-9

# Предел числа инъективных отображений для полного перебора
BRUTE_FORCE_LIMIT = 40320


class Turn(BaseModel):
    """Реплика одного диктора на полуинтервале [start, end)."""

    model_config = ConfigDict(frozen=True)

    start: float = Field(ge=0.0)
    end: float
    speaker: str = Field(min_length=1)

    @model_validator(mode="after")
    def check_positive(self) -> "Turn":
        if not self.end > self.start:
            raise ValueError(f"Реплика {self.speaker}: end={self.end} должно быть больше start={self.start}")
        return self

    @property
    def duration(self) -> float:
        return self.end - self.start


class TurnList(BaseModel):
    """Упорядоченные по времени реплики одной записи без перекрытий."""

    model_config = ConfigDict(frozen=True)

    recording_id: str = Field(min_length=1)
    turns: tuple[Turn, ...] = ()

    @field_validator("turns")
    @classmethod
    def sort_turns(cls, v: tuple[Turn, ...]) -> tuple[Turn, ...]:
        return tuple(sorted(v, key=lambda t: (t.start, t.end)))

    @model_validator(mode="after")
    def check_overlap(self) -> "TurnList":
        for prev, cur in itertools.pairwise(self.turns):
            if cur.start < prev.end - TOUCH_TOLERANCE:
                raise ValueError(
                    f"{self.recording_id}: перекрытие реплик {prev.speaker} [{prev.start}, {prev.end}) "
                    f"и {cur.speaker} [{cur.start}, {cur.end})"
                )
        return self

    @property
    def speakers(self) -> list[str]:
        return sorted({t.speaker for t in self.turns})

    @classmethod
    def from_labels(
        cls,
        recording_id: str,
        segments: Sequence[tuple[float, float]],
        labels: Sequence[int],
        prefix: str = "spk",
    ) -> "TurnList":
        """
        Собрать реплики из сегментов и меток.

        Соседние касающиеся сегменты одного диктора сливаются в одну реплику.

        Args:
            recording_id: Идентификатор записи
            segments: Пары (start, end) в порядке времени
            labels: Метка диктора для каждого сегмента
            prefix: Префикс имени диктора, имя = prefix + метка

        Raises:
            DataFormatError: Число меток не совпадает с числом сегментов, пустые
                или перекрывающиеся сегменты
        """
        if len(segments) != len(labels):
            raise DataFormatError(f"{recording_id}: сегментов {len(segments)}, меток {len(labels)}")
        spans: list[list] = []
        for (start, end), label in zip(segments, labels):
            speaker = f"{prefix}{int(label)}"
            if spans and spans[-1][2] == speaker and abs(start - spans[-1][1]) <= TOUCH_TOLERANCE:
                spans[-1][1] = end
                continue
            spans.append([float(start), float(end), speaker])
        try:
            turns = tuple(Turn(start=a, end=b, speaker=s) for a, b, s in spans)
            return cls(recording_id=recording_id, turns=turns)
        except ValidationError as e:
            raise DataFormatError(f"{recording_id}: {e.errors()[0]['msg']}") from e


class DerReport(BaseModel):
    """Слагаемые DER одной записи, все времена в секундах."""

    model_config = ConfigDict(frozen=True)

    recording_id: str = ""
    scored_time: float = Field(gt=0.0)
    miss_time: float = Field(ge=0.0)
    false_alarm_time: float = Field(ge=0.0)
    speaker_error_time: float = Field(ge=0.0)

    @computed_field
    @property
    def der(self) -> float:
        return (self.miss_time + self.false_alarm_time + self.speaker_error_time) / self.scored_time


class AggregateReport(BaseModel):
    """Сводка по корпусу: среднее DER и популяционное σ по записям."""

    model_config = ConfigDict(frozen=True)

    num_recordings: int
    mean_der: float
    std_der: float
    scored_time: float
    miss_time: float
    false_alarm_time: float
    speaker_error_time: float

    @computed_field
    @property
    def pooled_der(self) -> float:
        """DER по суммарным временам всего корпуса."""
        return (self.miss_time + self.false_alarm_time + self.speaker_error_time) / self.scored_time


# ========================
# Отображение дикторов
# ========================


def _best_mapping(
    ref_names: list[str], hyp_names: list[str], overlap: np.ndarray
) -> dict[str, str]:
    """
    Инъективное отображение гипотеза → эталон с максимальным суммарным перекрытием.

    Перебор идёт в лексикографическом порядке имён, при равенстве остаётся
    первое найденное. Пары с нулевым перекрытием отбрасываются.
    """
    nr, nh = len(ref_names), len(hyp_names)
    if nr == 0 or nh == 0:
        return {}
    k = min(nr, nh)
    pairs: list[tuple[int, int]]
    if math.perm(max(nr, nh), k) <= BRUTE_FORCE_LIMIT:
        best_total = -np.inf
        pairs = []
        if nh <= nr:
            candidates = (list(zip(perm, range(nh))) for perm in itertools.permutations(range(nr), nh))
        else:
            candidates = (list(zip(range(nr), perm)) for perm in itertools.permutations(range(nh), nr))
        for cand in candidates:
            total = sum(overlap[i, j] for i, j in cand)
            if total > best_total + 1e-12:
                best_total, pairs = total, cand
    else:
        rows, cols = linear_sum_assignment(-overlap)
        pairs = list(zip(rows.tolist(), cols.tolist()))
    return {hyp_names[j]: ref_names[i] for i, j in pairs if overlap[i, j] > 0.0}


def _overlap_matrix(reference: TurnList, hypothesis: TurnList) -> tuple[list[str], list[str], np.ndarray]:
    ref_names, hyp_names = reference.speakers, hypothesis.speakers
    ri = {n: i for i, n in enumerate(ref_names)}
    hi = {n: j for j, n in enumerate(hyp_names)}
    overlap = np.zeros((len(ref_names), len(hyp_names)))
    for r in reference.turns:
        for h in hypothesis.turns:
            overlap[ri[r.speaker], hi[h.speaker]] += max(0.0, min(r.end, h.end) - max(r.start, h.start))
    return ref_names, hyp_names, overlap


def map_speakers(reference: TurnList, hypothesis: TurnList) -> dict[str, str]:
    """
    Оптимальное отображение дикторов гипотезы в дикторов эталона.

    Максимизирует суммарное перекрытие по времени без воротников.
    Дикторы без перекрытия остаются неотображёнными.
    """
    ref_names, hyp_names, overlap = _overlap_matrix(reference, hypothesis)
    return _best_mapping(ref_names, hyp_names, overlap)


# ========================
# DER
# ========================


def _speaker_at(turns: Sequence[Turn], starts: np.ndarray, t: float) -> str | None:
    idx = int(np.searchsorted(starts, t, side="right")) - 1
    if idx >= 0 and t < turns[idx].end:
        return turns[idx].speaker
    return None


def compute_der(reference: TurnList, hypothesis: TurnList, collar: float | None = None) -> DerReport:
    """
    Вычислить DER записи.

    Вокруг каждой границы реплик эталона вырезается зона [b − collar, b + collar],
    она не входит ни в оцениваемое время, ни в ошибки. Отображение дикторов
    максимизирует совпавшее оцениваемое время.

    Args:
        reference: Эталонная разметка
        hypothesis: Разметка системы той же записи
        collar: Полуширина воротника в секундах; по умолчанию из настроек

    Returns:
        DerReport

    Raises:
        DataFormatError: Разные записи или пустое оцениваемое время
    """
    collar = settings.default_collar if collar is None else collar
    if collar < 0.0:
        raise UsageError(f"collar должно быть ≥ 0, получено {collar}")
    if reference.recording_id != hypothesis.recording_id:
        raise DataFormatError(
            f"Разные записи: эталон {reference.recording_id}, гипотеза {hypothesis.recording_id}"
        )

    boundaries = sorted({b for t in reference.turns for b in (t.start, t.end)})
    points = {b for t in hypothesis.turns for b in (t.start, t.end)}
    points.update(boundaries)
    if collar > 0.0:
        points.update(b - collar for b in boundaries)
        points.update(b + collar for b in boundaries)
    grid = sorted(points)
    bounds = np.asarray(boundaries)

    ref_starts = np.array([t.start for t in reference.turns])
    hyp_starts = np.array([t.start for t in hypothesis.turns])
    ref_names, hyp_names = reference.speakers, hypothesis.speakers
    ri = {n: i for i, n in enumerate(ref_names)}
    hi = {n: j for j, n in enumerate(hyp_names)}
    joint = np.zeros((len(ref_names), len(hyp_names)))

    scored = miss = false_alarm = 0.0
    for a, b in itertools.pairwise(grid):
        length = b - a
        if length <= 0.0:
            continue
        mid = 0.5 * (a + b)
        if collar > 0.0 and bounds.size and np.min(np.abs(bounds - mid)) < collar:
            continue
        ref = _speaker_at(reference.turns, ref_starts, mid)
        hyp = _speaker_at(hypothesis.turns, hyp_starts, mid)
        if ref is None:
            if hyp is not None:
                false_alarm += length
            continue
        scored += length
        if hyp is None:
            miss += length
        else:
            joint[ri[ref], hi[hyp]] += length

    if scored <= 0.0:
        raise DataFormatError(f"{reference.recording_id}: пустое оцениваемое время после воротников")

    mapping = _best_mapping(ref_names, hyp_names, joint)
    speaker_error = 0.0
    for i, r in enumerate(ref_names):
        for j, h in enumerate(hyp_names):
            if mapping.get(h) != r:
                speaker_error += joint[i, j]

    report = DerReport(
        recording_id=reference.recording_id,
        scored_time=scored,
        miss_time=miss,
        false_alarm_time=false_alarm,
        speaker_error_time=speaker_error,
    )
    logger.debug(f"{reference.recording_id}: DER={report.der:.4f}, отображение {mapping}")
    return report


def aggregate_reports(reports: Sequence[DerReport]) -> AggregateReport:
    """
    Свести отчёты по записям.

    σ — популяционное стандартное отклонение (делитель N), для одной записи равно 0.

    Raises:
        UsageError: Пустой список отчётов
    """
    if not reports:
        raise UsageError("Нет отчётов для сводки")
    ders = np.array([r.der for r in reports])
    return AggregateReport(
        num_recordings=len(reports),
        mean_der=float(ders.mean()),
        std_der=float(ders.std(ddof=0)),
        scored_time=float(sum(r.scored_time for r in reports)),
        miss_time=float(sum(r.miss_time for r in reports)),
        false_alarm_time=float(sum(r.false_alarm_time for r in reports)),
        speaker_error_time=float(sum(r.speaker_error_time for r in reports)),
    )
