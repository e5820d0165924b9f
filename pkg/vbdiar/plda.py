"""
Двухковариационная PLDA-модель сегментных i-векторов.

Вектор наблюдения порождается как φ = y + ε, где вектор диктора
y ~ N(μ, Λ⁻¹), а остаток ε ~ N(0, 𝓛⁻¹). Модуль содержит:
- контейнер параметров TwoCovPlda и априорное распределение дикторов
- сэмплирование разговора по порождающей истории
- отношение правдоподобий «один диктор / разные дикторы»
- EM-обучение модели
- точное маргинальное правдоподобие разметки и полный перебор разметок
"""

import itertools
import logging
from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .config import settings
from .errors import DataFormatError, DimensionError, NumericalError, UsageError
from .linalg import (
    LOG_2PI,
    as_matrix,
    as_vector,
    chol,
    inverse_chol,
    is_symmetric,
    logdet_chol,
    ridge,
    symmetrize,
)

logger = logging.getLogger(__name__)

# Предел полного перебора разметок: S^M ≤ 2^20
MAX_ENUMERATION = 2**20


class PldaDocument(BaseModel):
    """JSON-документ модели: матрицы построчно."""

    model_config = ConfigDict(frozen=True)

    format_version: str = Field(default=settings.format_version)
    dim: int = Field(gt=0)
    mu: list[float]
    between_precision: list[list[float]]
    within_precision: list[list[float]]

    @model_validator(mode="after")
    def check_shapes(self) -> "PldaDocument":
        d = self.dim
        if len(self.mu) != d:
            raise ValueError(f"mu: ожидалось {d} чисел, получено {len(self.mu)}")
        for name in ("between_precision", "within_precision"):
            rows = getattr(self, name)
            if len(rows) != d or any(len(r) != d for r in rows):
                raise ValueError(f"{name}: ожидалась матрица {d}x{d}")
        return self


@dataclass(frozen=True, eq=False)
class TwoCovPlda:
    """
    Параметры двухковариационной PLDA.

    Неизменяем после создания; массивы доступны только для чтения,
    поэтому экземпляр безопасно разделять между потоками.
    """

    mu: NDArray[np.float64]
    between_precision: NDArray[np.float64]
    within_precision: NDArray[np.float64]

    def __post_init__(self) -> None:
        mu = as_vector(self.mu, name="mu").copy()
        d = mu.shape[0]
        mats = {}
        for name in ("between_precision", "within_precision"):
            a = np.array(getattr(self, name), dtype=np.float64)
            if a.shape != (d, d):
                raise DimensionError(f"{name}: ожидалась форма ({d}, {d}), получена {a.shape}")
            if not np.all(np.isfinite(a)):
                raise NumericalError(f"{name}: нечисловые элементы")
            if not is_symmetric(a):
                raise DataFormatError(f"{name}: матрица не симметрична")
            a.flags.writeable = False
            mats[name] = a
        mu.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "between_precision", mats["between_precision"])
        object.__setattr__(self, "within_precision", mats["within_precision"])
        # Проверка положительной определённости
        _ = self.between_factor, self.within_factor

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])

    @cached_property
    def between_factor(self) -> NDArray[np.float64]:
        """Нижний фактор Холецкого Λ."""
        return chol(self.between_precision, "between_precision")

    @cached_property
    def within_factor(self) -> NDArray[np.float64]:
        """Нижний фактор Холецкого 𝓛."""
        return chol(self.within_precision, "within_precision")

    @cached_property
    def between_covariance(self) -> NDArray[np.float64]:
        return inverse_chol(self.between_factor)

    @cached_property
    def within_covariance(self) -> NDArray[np.float64]:
        return inverse_chol(self.within_factor)

    @classmethod
    def from_covariances(cls, mu, between_covariance, within_covariance) -> "TwoCovPlda":
        """Построить модель по ковариациям Λ⁻¹ и 𝓛⁻¹."""
        b = inverse_chol(chol(symmetrize(np.asarray(between_covariance, float)), "between_covariance"))
        w = inverse_chol(chol(symmetrize(np.asarray(within_covariance, float)), "within_covariance"))
        return cls(mu=mu, between_precision=b, within_precision=w)

    def to_document(self) -> PldaDocument:
        return PldaDocument(
            dim=self.dim,
            mu=self.mu.tolist(),
            between_precision=self.between_precision.tolist(),
            within_precision=self.within_precision.tolist(),
        )

    @classmethod
    def from_document(cls, doc: PldaDocument) -> "TwoCovPlda":
        return cls(
            mu=np.array(doc.mu),
            between_precision=np.array(doc.between_precision),
            within_precision=np.array(doc.within_precision),
        )


class SpeakerPrior(BaseModel):
    """Априорные вероятности π_s того, что в сегменте говорит диктор s."""

    model_config = ConfigDict(frozen=True)

    num_speakers: int = Field(gt=0)
    pi: tuple[float, ...]

    @model_validator(mode="before")
    @classmethod
    def default_uniform(cls, data):
        if isinstance(data, dict) and data.get("pi") is None and "num_speakers" in data:
            s = int(data["num_speakers"])
            data = {**data, "pi": tuple(1.0 / s for _ in range(s))}
        return data

    @model_validator(mode="after")
    def check_simplex(self) -> "SpeakerPrior":
        if len(self.pi) != self.num_speakers:
            raise ValueError(f"pi: ожидалось {self.num_speakers} вероятностей")
        if any(p < 0.0 for p in self.pi):
            raise ValueError("pi: отрицательная вероятность")
        if abs(sum(self.pi) - 1.0) > 1e-12:
            raise ValueError(f"pi: сумма {sum(self.pi)!r} не равна 1")
        return self

    @classmethod
    def uniform(cls, num_speakers: int) -> "SpeakerPrior":
        return cls(num_speakers=num_speakers)

    @property
    def log_pi(self) -> NDArray[np.float64]:
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(self.pi, dtype=np.float64))


# ========================
# Сэмплирование
# ========================


def sample_speaker_vectors(
    model: TwoCovPlda, count: int, rng: np.random.Generator
) -> NDArray[np.float64]:
    """y ~ N(μ, Λ⁻¹): при Λ = K Kᵀ имеем y = μ + K⁻ᵀ z."""
    z = rng.standard_normal((model.dim, count))
    return (model.mu[:, np.newaxis] + solve_triangular(model.between_factor, z, lower=True, trans="T")).T


def sample_residuals(
    model: TwoCovPlda,
    count: int,
    rng: np.random.Generator,
    scale: NDArray[np.float64] | float = 1.0,
) -> NDArray[np.float64]:
    """ε ~ N(0, scale · 𝓛⁻¹), scale — скаляр или вектор длины count."""
    z = rng.standard_normal((model.dim, count))
    eps = solve_triangular(model.within_factor, z, lower=True, trans="T").T
    return eps * np.sqrt(np.asarray(scale, dtype=np.float64)).reshape(-1, 1)


def sample_conversation(
    model: TwoCovPlda,
    prior: SpeakerPrior,
    num_segments: int,
    seed: int | np.random.SeedSequence,
    residual_scale: NDArray[np.float64] | float = 1.0,
) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """
    Сэмплировать разговор по порождающей истории.

    Один вектор y_s на диктора на весь разговор, свежий остаток ε_m
    на каждый сегмент.

    Args:
        model: Порождающая модель
        prior: Априорное распределение меток
        num_segments: Число сегментов M
        seed: Зерно генератора
        residual_scale: Множитель ковариации остатка, скаляр или вектор длины M

    Returns:
        Пара (вложения (M, D), метки дикторов (M,))
    """
    if num_segments < 1:
        raise UsageError(f"num_segments должно быть ≥ 1, получено {num_segments}")
    scale = np.asarray(residual_scale, dtype=np.float64)
    if scale.ndim == 1 and scale.shape != (num_segments,):
        raise DimensionError(f"residual_scale: ожидалось {num_segments} значений, получено {scale.shape[0]}")
    if np.any(scale <= 0.0):
        raise UsageError("residual_scale должен быть положительным")
    rng = np.random.default_rng(seed)
    speakers = sample_speaker_vectors(model, prior.num_speakers, rng)
    labels = rng.choice(prior.num_speakers, size=num_segments, p=np.asarray(prior.pi))
    embeddings = speakers[labels] + sample_residuals(model, num_segments, rng, scale)
    return embeddings, labels.astype(np.int64)


# ========================
# Правдоподобия
# ========================


def _log_marginal_same_size(model: TwoCovPlda, groups: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    log p(x_1..x_n) для K групп одинакового размера n, y проинтегрирован.

    Args:
        groups: Массив (K, n, D)
    """
    k, n, d = groups.shape
    centered = groups - model.mu
    # Σ_j (x_j − μ)ᵀ 𝓛 (x_j − μ) через фактор 𝓛 = Lw Lwᵀ
    proj = centered @ model.within_factor
    quad = np.sum(proj * proj, axis=(1, 2))
    # b = 𝓛 Σ_j (x_j − μ); bᵀ (Λ + n𝓛)⁻¹ b
    b = centered.sum(axis=1) @ model.within_precision
    post_factor = chol(model.between_precision + n * model.within_precision, "posterior precision")
    z = solve_triangular(post_factor, b.T, lower=True)
    explained = np.sum(z * z, axis=0)
    const = (
        -0.5 * n * d * LOG_2PI
        + 0.5 * n * logdet_chol(model.within_factor)
        + 0.5 * logdet_chol(model.between_factor)
        - 0.5 * logdet_chol(post_factor)
    )
    return const - 0.5 * (quad - explained)


def log_marginal_group(model: TwoCovPlda, vectors) -> float:
    """log ∫ N(y; μ, Λ⁻¹) ∏_j N(x_j; y, 𝓛⁻¹) dy для векторов одного диктора."""
    x = as_matrix(vectors, model.dim, "vectors")
    return float(_log_marginal_same_size(model, x[np.newaxis])[0])


def llr_same_speaker(model: TwoCovPlda, x1, x2) -> float:
    """
    Логарифм отношения правдоподобий «один диктор» против «разные дикторы».

    log p(x1, x2 | один диктор) − log p(x1) − log p(x2); симметрично по аргументам.
    """
    a = as_vector(x1, model.dim, "x1")
    b = as_vector(x2, model.dim, "x2")
    # Канонический порядок аргументов: точная симметрия при любом порядке суммирования
    if tuple(b) < tuple(a):
        a, b = b, a
    pair = _log_marginal_same_size(model, np.stack([a, b])[np.newaxis])[0]
    singles = _log_marginal_same_size(model, np.stack([a, b])[:, np.newaxis, :])
    return float(pair - (singles[0] + singles[1]))


def score_matrix(model: TwoCovPlda, vectors) -> NDArray[np.float64]:
    """Матрица LLR «один диктор» для всех пар строк."""
    x = as_matrix(vectors, model.dim, "vectors")
    n = x.shape[0]
    out = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        out[i, j] = out[j, i] = llr_same_speaker(model, x[i], x[j])
    for i in range(n):
        out[i, i] = llr_same_speaker(model, x[i], x[i])
    return out


def _group_log_likelihood(model: TwoCovPlda, groups: Sequence[NDArray[np.float64]]) -> float:
    """Сумма маргинальных правдоподобий групп; группы одного размера считаются пакетом."""
    by_size: dict[int, list[NDArray[np.float64]]] = {}
    for g in groups:
        if len(g):
            by_size.setdefault(len(g), []).append(g)
    total = 0.0
    for n in sorted(by_size):
        total += float(np.sum(_log_marginal_same_size(model, np.stack(by_size[n]))))
    return total


def marginal_loglik_assignment(model: TwoCovPlda, embeddings, assignment) -> float:
    """
    Точное log ∫ p(Φ, Y | I) dY для фиксированной разметки I.

    Каждый y_s интегрируется аналитически; дикторы без сегментов дают 0.
    """
    x = as_matrix(embeddings, model.dim, "embeddings")
    labels = np.asarray(assignment, dtype=np.int64)
    if labels.shape != (x.shape[0],):
        raise DimensionError(f"assignment: ожидалось {x.shape[0]} меток, получено {labels.shape}")
    if labels.size and labels.min() < 0:
        raise DimensionError("assignment: отрицательный индекс диктора")
    groups = [x[labels == s] for s in np.unique(labels)]
    return _group_log_likelihood(model, groups)


@dataclass(frozen=True)
class EnumerationResult:
    """Результат полного перебора разметок."""

    log_evidence: float
    map_assignment: tuple[int, ...]
    log_joint: NDArray[np.float64]
    assignments: list[tuple[int, ...]]


def enumerate_assignments(model: TwoCovPlda, embeddings, prior: SpeakerPrior) -> EnumerationResult:
    """
    Точный вывод перебором всех S^M разметок.

    log p(Φ, I) = marginal_loglik_assignment + Σ_m log π_{i_m}; MAP при равенстве —
    первая разметка в лексикографическом порядке.

    Raises:
        UsageError: Число разметок превышает MAX_ENUMERATION
    """
    x = as_matrix(embeddings, model.dim, "embeddings")
    m, s = x.shape[0], prior.num_speakers
    if s**m > MAX_ENUMERATION:
        raise UsageError(f"Перебор {s}^{m} разметок превышает предел {MAX_ENUMERATION}")
    log_pi = prior.log_pi
    assignments = list(itertools.product(range(s), repeat=m))
    log_joint = np.empty(len(assignments))
    for idx, a in enumerate(assignments):
        lp = float(np.sum(log_pi[list(a)]))
        log_joint[idx] = -np.inf if np.isneginf(lp) else lp + marginal_loglik_assignment(model, x, a)
    best = int(np.argmax(log_joint))
    return EnumerationResult(
        log_evidence=float(logsumexp(log_joint)),
        map_assignment=assignments[best],
        log_joint=log_joint,
        assignments=assignments,
    )


# ========================
# EM-обучение
# ========================


@dataclass
class EmResult:
    """Результат EM: модель, история log-правдоподобия, предупреждения."""

    model: TwoCovPlda
    log_likelihoods: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def group_by_speaker(
    data: Iterable[tuple[Hashable, Sequence[float]]],
) -> tuple[list[Hashable], list[NDArray[np.float64]]]:
    """Сгруппировать пары (диктор, вектор) в порядке первого появления диктора."""
    groups: dict[Hashable, list] = {}
    for speaker, vector in data:
        groups.setdefault(speaker, []).append(vector)
    if not groups:
        raise DataFormatError("Пустой обучающий набор")
    ids = list(groups)
    try:
        arrays = [np.asarray(groups[i], dtype=np.float64) for i in ids]
    except ValueError as e:
        raise DimensionError(f"Векторы разной размерности: {e}") from e
    dims = {a.shape[1] if a.ndim == 2 else -1 for a in arrays}
    if len(dims) != 1 or -1 in dims:
        raise DimensionError(f"Векторы разной размерности: {sorted(dims)}")
    return ids, arrays


def log_likelihood(model: TwoCovPlda, data) -> float:
    """Наблюдаемое log-правдоподобие обучающего набора (целевая функция EM)."""
    _, groups = group_by_speaker(data)
    return _group_log_likelihood(model, groups)


def _moment_init(
    groups: list[NDArray[np.float64]], warnings: list[str]
) -> TwoCovPlda:
    """Старт методом моментов: μ — общее среднее, межклассовый и внутриклассовый разброс."""
    stacked = np.concatenate(groups)
    mu = stacked.mean(axis=0)
    means = np.stack([g.mean(axis=0) for g in groups])
    between = symmetrize((means - mu).T @ (means - mu) / len(groups))
    within = symmetrize(
        sum((g - g.mean(axis=0)).T @ (g - g.mean(axis=0)) for g in groups) / stacked.shape[0]
    )
    between, fixed_b = ridge(between, settings.ridge_scale, "межклассовый разброс")
    within, fixed_w = ridge(within, settings.ridge_scale, "внутриклассовый разброс")
    if fixed_b:
        warnings.append("межклассовый разброс вырожден: добавлена гребневая поправка")
    if fixed_w:
        warnings.append("внутриклассовый разброс вырожден: добавлена гребневая поправка")
    return TwoCovPlda.from_covariances(mu, between, within)


def _em_step(
    model: TwoCovPlda, groups: list[NDArray[np.float64]], warnings: list[str]
) -> TwoCovPlda:
    """Одна итерация EM: E-шаг по апостериорным y_i, M-шаг для μ, Λ⁻¹, 𝓛⁻¹."""
    d = model.dim
    k = len(groups)
    total = sum(len(g) for g in groups)
    prior_term = model.between_precision @ model.mu

    sum_ey = np.zeros(d)
    sum_second = np.zeros((d, d))
    eys: list[NDArray[np.float64]] = []
    covs: dict[int, NDArray[np.float64]] = {}
    for g in groups:
        n = len(g)
        if n not in covs:
            covs[n] = inverse_chol(
                chol(model.between_precision + n * model.within_precision, "posterior precision")
            )
        ey = covs[n] @ (prior_term + model.within_precision @ g.sum(axis=0))
        eys.append(ey)
        sum_ey += ey
    mu = sum_ey / k

    within = np.zeros((d, d))
    for g, ey in zip(groups, eys, strict=True):
        n = len(g)
        dev = ey - mu
        sum_second += covs[n] + np.outer(dev, dev)
        resid = g - ey
        within += resid.T @ resid + n * covs[n]

    between, fixed_b = ridge(symmetrize(sum_second / k), settings.ridge_scale, "межклассовая ковариация")
    within, fixed_w = ridge(symmetrize(within / total), settings.ridge_scale, "внутриклассовая ковариация")
    if fixed_b or fixed_w:
        warnings.append("M-шаг: вырожденная ковариация, добавлена гребневая поправка")
    return TwoCovPlda.from_covariances(mu, between, within)


def train_em(
    data: Iterable[tuple[Hashable, Sequence[float]]],
    iterations: int,
    init: TwoCovPlda | None = None,
) -> EmResult:
    """
    Обучить двухковариационную PLDA алгоритмом EM.

    Args:
        data: Пары (идентификатор диктора, вектор)
        iterations: Число итераций EM (≥ 1)
        init: Начальная модель; по умолчанию — старт методом моментов

    Returns:
        EmResult с моделью и историей log-правдоподобия (iterations + 1 значений)

    Raises:
        UsageError: iterations < 1
        DataFormatError: Меньше двух дикторов или диктор с одним вектором
    """
    if iterations < 1:
        raise UsageError(f"iterations должно быть ≥ 1, получено {iterations}")
    ids, groups = group_by_speaker(data)
    if len(groups) < 2:
        raise DataFormatError(f"Нужно хотя бы 2 диктора, получено {len(groups)}")
    short = [str(i) for i, g in zip(ids, groups, strict=True) if len(g) < 2]
    if short:
        raise DataFormatError(f"У дикторов меньше 2 векторов: {', '.join(short[:5])}")

    warnings: list[str] = []
    if init is None:
        model = _moment_init(groups, warnings)
    else:
        if init.dim != groups[0].shape[1]:
            raise DimensionError(f"init: размерность {init.dim}, данные {groups[0].shape[1]}")
        model = init

    history = [_group_log_likelihood(model, groups)]
    logger.info(f"EM: {len(groups)} дикторов, {sum(map(len, groups))} векторов, D={model.dim}")
    for it in range(iterations):
        model = _em_step(model, groups, warnings)
        history.append(_group_log_likelihood(model, groups))
        logger.debug(f"EM итерация {it + 1}: log-правдоподобие {history[-1]:.6f}")
        if history[-1] < history[-2] - 1e-8:
            logger.warning(
                f"EM итерация {it + 1}: log-правдоподобие уменьшилось на {history[-2] - history[-1]:.3e}"
            )
    for w in warnings:
        logger.warning(w)
    return EmResult(model=model, log_likelihoods=history, warnings=warnings)
