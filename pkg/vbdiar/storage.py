"""
Чтение и запись файлов vbdiar.

Форматы:
- модель и конвейер — JSON-документы с полем format_version
- обучающий набор — JSON Lines {speaker, vector}
- вложения разговора — JSON Lines {segment_index, start, end, vector}
- разметка — RTTM, одна реплика на строку
- корпус — каталог с meta.json, model.json, embeddings/ и reference/

Любая запись атомарна: временный файл в том же каталоге и os.replace.
"""

import itertools
import logging
import os
import shutil
import tempfile
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import TypeVar

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import settings
from .der import TOUCH_TOLERANCE, Turn, TurnList
from .errors import DataFormatError, DimensionError, UsageError
from .plda import PldaDocument, TwoCovPlda
from .preprocess import PipelineDocument, ProjectionPipeline
from .synth import Conversation, CorpusSpec

logger = logging.getLogger(__name__)

DocumentT = TypeVar("DocumentT", bound=BaseModel)


# ========================
# Записи
# ========================


class TrainingRecord(BaseModel):
    """Строка обучающего набора PLDA."""

    model_config = ConfigDict(frozen=True)

    speaker: str = Field(min_length=1)
    vector: list[float]


class SegmentRecord(BaseModel):
    """Строка файла вложений разговора."""

    model_config = ConfigDict(frozen=True)

    segment_index: int = Field(ge=0)
    start: float = Field(ge=0.0)
    end: float
    vector: list[float]


class CorpusMeta(BaseModel):
    """meta.json корпуса: параметры генерации и список записей."""

    format_version: str = Field(default=settings.format_version)
    spec: CorpusSpec
    recordings: list[str]


# ========================
# Базовый ввод-вывод
# ========================


def atomic_write_text(path: Path | str, text: str) -> None:
    """Записать текст атомарно: временный файл рядом и os.replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def read_text(path: Path | str) -> str:
    """
    Прочитать текстовый файл.

    Raises:
        DataFormatError: Файл не найден или не читается
    """
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataFormatError(f"Не удалось прочитать {path}: {e.strerror or e}") from e


def read_document(path: Path | str, document: type[DocumentT]) -> DocumentT:
    """Прочитать и провалидировать JSON-документ."""
    text = read_text(path)
    try:
        return document.model_validate_json(text)
    except ValidationError as e:
        raise DataFormatError(f"{path}: некорректный документ: {_first_error(e)}") from e


def write_document(path: Path | str, document: BaseModel) -> None:
    atomic_write_text(path, document.model_dump_json(indent=2) + "\n")


def _first_error(e: ValidationError) -> str:
    err = e.errors()[0]
    loc = ".".join(str(p) for p in err["loc"])
    return f"{loc}: {err['msg']}" if loc else err["msg"]


def _read_jsonl(path: Path | str, record: type[DocumentT]) -> list[DocumentT]:
    records = []
    for lineno, line in enumerate(read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(record.model_validate_json(line))
        except ValidationError as e:
            raise DataFormatError(f"{path}:{lineno}: {_first_error(e)}") from e
    return records


def _write_jsonl(path: Path | str, records: Iterable[BaseModel]) -> None:
    atomic_write_text(path, "".join(r.model_dump_json() + "\n" for r in records))


# ========================
# Модель и конвейер
# ========================


def save_model(path: Path | str, model: TwoCovPlda) -> None:
    write_document(path, model.to_document())
    logger.info(f"Модель сохранена: {path}")


def load_model(path: Path | str) -> TwoCovPlda:
    """
    Загрузить PLDA-модель.

    Raises:
        DataFormatError: Файл не читается или документ некорректен
        NumericalError: Матрицы точности не положительно определены
    """
    return TwoCovPlda.from_document(read_document(path, PldaDocument))


def save_pipeline(path: Path | str, pipeline: ProjectionPipeline) -> None:
    write_document(path, pipeline.to_document())
    logger.info(f"Конвейер сохранён: {path}")


def load_pipeline(path: Path | str) -> ProjectionPipeline:
    return ProjectionPipeline.from_document(read_document(path, PipelineDocument))


# ========================
# Обучающий набор и вложения
# ========================


def write_training_set(path: Path | str, data: Iterable[tuple[str, Sequence[float]]]) -> None:
    _write_jsonl(path, (TrainingRecord(speaker=s, vector=list(map(float, v))) for s, v in data))


def read_training_set(path: Path | str) -> list[tuple[str, NDArray[np.float64]]]:
    """
    Прочитать обучающий набор.

    Raises:
        DataFormatError: Пустой файл или векторы разной длины
    """
    records = _read_jsonl(path, TrainingRecord)
    if not records:
        raise DataFormatError(f"{path}: пустой обучающий набор")
    dims = {len(r.vector) for r in records}
    if len(dims) != 1:
        raise DimensionError(f"{path}: векторы разной длины {sorted(dims)}")
    return [(r.speaker, np.asarray(r.vector, dtype=np.float64)) for r in records]


def write_embeddings(path: Path | str, conversation: Conversation) -> None:
    _write_jsonl(
        path,
        (
            SegmentRecord(segment_index=i, start=float(a), end=float(b), vector=v.tolist())
            for i, (a, b, v) in enumerate(zip(conversation.starts, conversation.ends, conversation.embeddings))
        ),
    )


def read_embeddings(path: Path | str) -> tuple[list[tuple[float, float]], NDArray[np.float64]]:
    """
    Прочитать вложения разговора.

    Returns:
        Пара (сегменты (start, end) в порядке индекса, матрица (M, D))

    Raises:
        DataFormatError: Пропуски в индексах, пустой файл, неверные или перекрывающиеся времена
    """
    records = _read_jsonl(path, SegmentRecord)
    if not records:
        raise DataFormatError(f"{path}: нет сегментов")
    records.sort(key=lambda r: r.segment_index)
    if [r.segment_index for r in records] != list(range(len(records))):
        raise DataFormatError(f"{path}: индексы сегментов должны идти подряд с 0")
    dims = {len(r.vector) for r in records}
    if len(dims) != 1:
        raise DimensionError(f"{path}: векторы разной длины {sorted(dims)}")
    for r in records:
        if not r.end > r.start:
            raise DataFormatError(f"{path}: сегмент {r.segment_index}: end ≤ start")
    for prev, cur in itertools.pairwise(records):
        if cur.start < prev.end - TOUCH_TOLERANCE:
            raise DataFormatError(
                f"{path}: сегмент {cur.segment_index} [{cur.start}, {cur.end}) перекрывается "
                f"с сегментом {prev.segment_index} [{prev.start}, {prev.end})"
            )
    segments = [(r.start, r.end) for r in records]
    return segments, np.array([r.vector for r in records], dtype=np.float64)


# ========================
# RTTM
# ========================


def format_rttm(turns: TurnList) -> str:
    """Строки RTTM: start и duration с тремя знаками после точки."""
    return "".join(
        f"SPEAKER {turns.recording_id} 1 {t.start:.3f} {t.end - t.start:.3f} <NA> <NA> {t.speaker} <NA> <NA>\n"
        for t in turns.turns
    )


def parse_rttm(text: str, source: str = "<rttm>") -> dict[str, TurnList]:
    """
    Разобрать RTTM: строки SPEAKER, сгруппированные по записи.

    Прочие типы строк и комментарии пропускаются.

    Raises:
        DataFormatError: Некорректная строка или перекрытие реплик
    """
    turns: dict[str, list[Turn]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0].startswith("#") or fields[0] != "SPEAKER":
            continue
        if len(fields) < 8:
            raise DataFormatError(f"{source}:{lineno}: ожидалось 10 полей, получено {len(fields)}")
        try:
            start, duration = float(fields[3]), float(fields[4])
            turn = Turn(start=start, end=round(start + duration, 9), speaker=fields[7])
        except (ValueError, ValidationError) as e:
            raise DataFormatError(f"{source}:{lineno}: некорректная реплика: {e}") from e
        turns.setdefault(fields[1], []).append(turn)

    result = {}
    for rec, items in turns.items():
        try:
            result[rec] = TurnList(recording_id=rec, turns=tuple(items))
        except ValidationError as e:
            raise DataFormatError(f"{source}: {_first_error(e)}") from e
    return result


def write_rttm(path: Path | str, turns: TurnList) -> None:
    atomic_write_text(path, format_rttm(turns))


def read_rttm(path: Path | str, recording_id: str | None = None) -> TurnList:
    """
    Прочитать RTTM одной записи.

    Args:
        path: Путь к файлу
        recording_id: Ожидаемая запись; по умолчанию имя файла без расширения

    Raises:
        DataFormatError: В файле другие записи
    """
    path = Path(path)
    recording_id = recording_id or path.stem
    parsed = parse_rttm(read_text(path), str(path))
    other = sorted(set(parsed) - {recording_id})
    if other:
        raise DataFormatError(f"{path}: ожидалась запись {recording_id}, найдены {other}")
    return parsed.get(recording_id, TurnList(recording_id=recording_id))


# ========================
# Каталог корпуса
# ========================


class CorpusStore:
    """Каталог корпуса на диске."""

    META = "meta.json"
    MODEL = "model.json"
    EMBEDDINGS = "embeddings"
    REFERENCE = "reference"
    TRAIN = "train.jsonl"

    def __init__(self, root: Path | str):
        """
        Инициализация хранилища.

        Args:
            root: Каталог корпуса
        """
        self.root = Path(root)

    def embeddings_path(self, recording_id: str) -> Path:
        return self.root / self.EMBEDDINGS / f"{recording_id}.jsonl"

    def reference_path(self, recording_id: str) -> Path:
        return self.root / self.REFERENCE / f"{recording_id}.rttm"

    def prepare(self, force: bool = False) -> None:
        """
        Подготовить пустой каталог для записи корпуса.

        Raises:
            UsageError: Каталог не пуст и force не задан
        """
        if self.root.exists() and not self.root.is_dir():
            raise UsageError(f"{self.root} существует и не является каталогом")
        if self.root.is_dir() and any(self.root.iterdir()):
            if not force:
                raise UsageError(f"Каталог {self.root} не пуст, используйте --force")
            logger.warning(f"Перезапись корпуса в {self.root}")
            for name in (self.EMBEDDINGS, self.REFERENCE):
                shutil.rmtree(self.root / name, ignore_errors=True)
            for name in (self.META, self.MODEL, self.TRAIN):
                (self.root / name).unlink(missing_ok=True)
        (self.root / self.EMBEDDINGS).mkdir(parents=True, exist_ok=True)
        (self.root / self.REFERENCE).mkdir(parents=True, exist_ok=True)

    def write(self, spec: CorpusSpec, model: TwoCovPlda, corpus: Sequence[Conversation]) -> None:
        for conv in corpus:
            write_embeddings(self.embeddings_path(conv.recording_id), conv)
            write_rttm(self.reference_path(conv.recording_id), conv.reference)
        save_model(self.root / self.MODEL, model)
        write_document(
            self.root / self.META,
            CorpusMeta(spec=spec, recordings=[c.recording_id for c in corpus]),
        )
        logger.info(f"Корпус записан: {self.root}, {len(corpus)} разговоров")

    def read_meta(self) -> CorpusMeta:
        return read_document(self.root / self.META, CorpusMeta)

    def recording_ids(self) -> list[str]:
        """Записи корпуса: из meta.json, иначе по файлам вложений."""
        if (self.root / self.META).exists():
            return self.read_meta().recordings
        directory = self.root / self.EMBEDDINGS
        if not directory.is_dir():
            raise DataFormatError(f"{self.root}: нет каталога {self.EMBEDDINGS}/")
        return sorted(p.stem for p in directory.glob("*.jsonl"))

    def read_embeddings(self, recording_id: str) -> tuple[list[tuple[float, float]], NDArray[np.float64]]:
        return read_embeddings(self.embeddings_path(recording_id))

    def read_reference(self, recording_id: str) -> TurnList:
        return read_rttm(self.reference_path(recording_id), recording_id)

    def load_model(self) -> TwoCovPlda:
        return load_model(self.root / self.MODEL)


def write_trace(path: Path | str, trace: Iterable[BaseModel]) -> None:
    """Записать трассу VB строками JSON."""
    _write_jsonl(path, trace)
