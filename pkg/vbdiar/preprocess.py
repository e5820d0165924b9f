"""
Преобразование вложений перед PLDA: LDA, отбеливание, нормализация длины.

Порядок применения фиксирован: проекция LDA, затем аффинное отбеливание,
затем (опционально) приведение к единичной норме.
"""

import logging
from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import eigh

from .config import settings
from .errors import DimensionError, NumericalError, UsageError
from .linalg import as_matrix, as_vector, chol, inverse_chol, ridge, symmetrize
from .plda import group_by_speaker

logger = logging.getLogger(__name__)

# Размерность LDA по умолчанию
DEFAULT_LDA_DIM = 150


class PipelineDocument(BaseModel):
    """JSON-документ конвейера: матрицы построчно."""

    model_config = ConfigDict(frozen=True)

    format_version: str = Field(default=settings.format_version)
    lda: list[list[float]]
    whitener: list[list[float]]
    offset: list[float]
    length_normalize: bool = True

    @model_validator(mode="after")
    def check_shapes(self) -> "PipelineDocument":
        d = len(self.lda)
        if d == 0 or len({len(r) for r in self.lda}) != 1:
            raise ValueError("lda: ожидалась непустая прямоугольная матрица")
        if len(self.whitener) != d or any(len(r) != d for r in self.whitener):
            raise ValueError(f"whitener: ожидалась матрица {d}x{d}")
        if len(self.offset) != d:
            raise ValueError(f"offset: ожидалось {d} чисел")
        return self


@dataclass(frozen=True, eq=False)
class Whitener:
    """Аффинное отбеливание: x ↦ W (x − offset)."""

    matrix: NDArray[np.float64]
    offset: NDArray[np.float64]

    def __call__(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return (x - self.offset) @ self.matrix.T


@dataclass(frozen=True, eq=False)
class ProjectionPipeline:
    """LDA (d×D), отбеливатель (d×d и сдвиг d), флаг нормализации длины."""

    lda: NDArray[np.float64]
    whitener: Whitener
    length_normalize: bool = True

    def __post_init__(self) -> None:
        lda = np.array(self.lda, dtype=np.float64)
        if lda.ndim != 2:
            raise DimensionError(f"lda: ожидалась матрица, получена форма {lda.shape}")
        d = lda.shape[0]
        mat = np.array(self.whitener.matrix, dtype=np.float64)
        off = as_vector(self.whitener.offset, d, "offset").copy()
        if mat.shape != (d, d):
            raise DimensionError(f"whitener: ожидалась форма ({d}, {d}), получена {mat.shape}")
        for a in (lda, mat, off):
            a.flags.writeable = False
        object.__setattr__(self, "lda", lda)
        object.__setattr__(self, "whitener", Whitener(matrix=mat, offset=off))

    @property
    def input_dim(self) -> int:
        return int(self.lda.shape[1])

    @property
    def output_dim(self) -> int:
        return int(self.lda.shape[0])

    @classmethod
    def identity(cls, dim: int, length_normalize: bool = False) -> "ProjectionPipeline":
        return cls(
            lda=np.eye(dim),
            whitener=Whitener(matrix=np.eye(dim), offset=np.zeros(dim)),
            length_normalize=length_normalize,
        )

    @classmethod
    def fit(
        cls,
        data: Iterable[tuple[Hashable, Sequence[float]]],
        lda_dim: int | None = DEFAULT_LDA_DIM,
        length_normalize: bool = True,
    ) -> "ProjectionPipeline":
        """
        Обучить LDA и отбеливатель на одном и том же наборе, в этом порядке.

        Args:
            data: Пары (диктор, вектор)
            lda_dim: Размерность LDA; None — тождественная проекция
            length_normalize: Применять ли нормализацию длины
        """
        pairs = list(data)
        x = as_matrix([v for _, v in pairs], name="data")
        lda = np.eye(x.shape[1]) if lda_dim is None else fit_lda(pairs, lda_dim)
        whitener = fit_whitener(x @ lda.T)
        logger.info(f"Конвейер обучен: {x.shape[1]} -> {lda.shape[0]}, нормализация={length_normalize}")
        return cls(lda=lda, whitener=whitener, length_normalize=length_normalize)

    def apply_many(self, vectors) -> NDArray[np.float64]:
        """Применить конвейер к матрице строк (N, D)."""
        x = as_matrix(vectors, self.input_dim, "vectors")
        y = self.whitener(x @ self.lda.T)
        if self.length_normalize:
            norms = np.linalg.norm(y, axis=1, keepdims=True)
            if np.any(norms == 0.0):
                raise NumericalError("Нормализация длины: нулевой вектор после отбеливания")
            y = y / norms
        return y

    def to_document(self) -> PipelineDocument:
        return PipelineDocument(
            lda=self.lda.tolist(),
            whitener=self.whitener.matrix.tolist(),
            offset=self.whitener.offset.tolist(),
            length_normalize=self.length_normalize,
        )

    @classmethod
    def from_document(cls, doc: PipelineDocument) -> "ProjectionPipeline":
        return cls(
            lda=np.array(doc.lda),
            whitener=Whitener(matrix=np.array(doc.whitener), offset=np.array(doc.offset)),
            length_normalize=doc.length_normalize,
        )


def apply(pipeline: ProjectionPipeline, x) -> NDArray[np.float64]:
    """Применить конвейер к одному вектору: LDA, отбеливание, нормализация длины."""
    v = as_vector(x, pipeline.input_dim, "x")
    return pipeline.apply_many(v[np.newaxis])[0]


def fit_lda(
    data: Iterable[tuple[Hashable, Sequence[float]]], out_dim: int = DEFAULT_LDA_DIM
) -> NDArray[np.float64]:
    """
    Обучить проекцию LDA.

    Решается симметричная обобщённая задача S_b v = λ S_w v, где S_w
    регуляризована гребнем ridge_scale · trace / D. Строки результата —
    направления единичной длины по убыванию λ.

    Returns:
        Матрица (out_dim, D)

    Raises:
        UsageError: out_dim превышает достижимый ранг min(D, S − 1)
    """
    _, groups = group_by_speaker(data)
    if len(groups) < 2:
        raise UsageError(f"LDA требует хотя бы 2 диктора, получено {len(groups)}")
    x = np.concatenate(groups)
    n, d = x.shape
    max_dim = min(d, len(groups) - 1)
    if out_dim < 1 or out_dim > max_dim:
        raise UsageError(f"lda_dim={out_dim} недостижим: максимум {max_dim}")

    mean = x.mean(axis=0)
    s_w = np.zeros((d, d))
    s_b = np.zeros((d, d))
    for g in groups:
        m = g.mean(axis=0)
        c = g - m
        s_w += c.T @ c
        s_b += len(g) * np.outer(m - mean, m - mean)
    s_w = symmetrize(s_w / n)
    s_b = symmetrize(s_b / n)
    s_w = s_w + settings.ridge_scale * float(np.trace(s_w)) / d * np.eye(d)

    values, vectors = eigh(s_b, s_w)
    order = np.argsort(values)[::-1][:out_dim]
    rows = vectors[:, order].T
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def fit_whitener(data) -> Whitener:
    """
    Обучить отбеливатель по Холецкому обратной выборочной ковариации.

    Σ⁻¹ = L Lᵀ, W = Lᵀ: преобразованная выборка имеет нулевое среднее
    и единичную (смещённую, 1/N) ковариацию.

    Raises:
        UsageError: Меньше двух векторов
        NumericalError: Нулевая ковариация
    """
    x = as_matrix(data, name="data")
    if x.shape[0] < 2:
        raise UsageError(f"Отбеливание требует хотя бы 2 вектора, получено {x.shape[0]}")
    mean = x.mean(axis=0)
    c = x - mean
    cov = symmetrize(c.T @ c / x.shape[0])
    cov, _ = ridge(cov, settings.ridge_scale, "выборочная ковариация")
    precision = inverse_chol(chol(cov, "выборочная ковариация"))
    matrix = chol(precision, "обратная ковариация").T
    return Whitener(matrix=matrix, offset=mean)
