"""
Базовая система KM-PCA.

Для каждого разговора отдельно: PCA с сохранением 50% энергии (суммы
собственных значений выборочной ковариации), затем сферический k-means
с косинусным расстоянием и K = 2.
"""

import logging

import numpy as np
from numpy.typing import NDArray

from .errors import DataFormatError, NumericalError, UsageError
from .linalg import as_matrix

logger = logging.getLogger(__name__)

# Доля сохраняемой энергии
ENERGY_FRACTION = 0.5


def energy_dim(eigenvalues, fraction: float = ENERGY_FRACTION) -> int:
    """
    Наименьшее d, при котором сумма d наибольших собственных значений ≥ fraction · след.

    Raises:
        NumericalError: Нулевой след
    """
    if not 0.0 < fraction <= 1.0:
        raise UsageError(f"fraction должно лежать в (0, 1], получено {fraction}")
    eigs = np.sort(np.clip(np.asarray(eigenvalues, dtype=np.float64), 0.0, None))[::-1]
    total = float(eigs.sum())
    if total <= 0.0:
        raise NumericalError("Нулевая суммарная дисперсия")
    cumulative = np.cumsum(eigs)
    # Относительный допуск на округление при точном попадании в порог
    hits = np.nonzero(cumulative >= fraction * total * (1.0 - 1e-12))[0]
    return int(hits[0]) + 1


def pca_project_half_energy(embeddings) -> NDArray[np.float64]:
    """
    Центрировать векторы разговора и спроецировать на главные оси с 50% энергии.

    Returns:
        Матрица (M, d), d ≥ 1

    Raises:
        UsageError: Меньше двух векторов
        NumericalError: Все векторы совпадают
    """
    x = as_matrix(embeddings, name="embeddings")
    if x.shape[0] < 2:
        raise UsageError(f"PCA требует хотя бы 2 вектора, получено {x.shape[0]}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1]
    d = energy_dim(values[order])
    logger.debug(f"PCA: {x.shape[1]} -> {d}")
    return centered @ vectors[:, order[:d]]


def _unit_rows(x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    norms = np.linalg.norm(x, axis=1)
    nonzero = norms > 0.0
    unit = np.zeros_like(x)
    unit[nonzero] = x[nonzero] / norms[nonzero, np.newaxis]
    return unit, nonzero


def cosine_objective(vectors, labels, k: int | None = None) -> float:
    """
    Σ_m (1 − cos(v_m, c_label(m))) по ненулевым векторам.

    c_j — нормированная сумма единичных векторов кластера, поэтому вклад
    кластера равен |j| − ‖Σ v‖.
    """
    unit, nonzero = _unit_rows(as_matrix(vectors, name="vectors"))
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1 if k is None else k
    total = 0.0
    for j in range(k):
        members = unit[(labels == j) & nonzero]
        total += len(members) - float(np.linalg.norm(members.sum(axis=0)))
    return total


def _kmeans_pp(unit: NDArray[np.float64], k: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Посев k-means++ с косинусным расстоянием 1 − cos."""
    n = unit.shape[0]
    chosen = [int(rng.integers(n))]
    dist = 1.0 - unit @ unit[chosen[0]]
    for _ in range(1, k):
        weights = np.clip(dist, 0.0, None)
        weights[chosen] = 0.0
        if weights.sum() <= 0.0:
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        else:
            idx = int(rng.choice(n, p=weights / weights.sum()))
        chosen.append(idx)
        dist = np.minimum(dist, 1.0 - unit @ unit[idx])
    return unit[chosen].copy()


def _assign(unit: NDArray[np.float64], centroids: NDArray[np.float64]) -> NDArray[np.int64]:
    return np.argmax(unit @ centroids.T, axis=1).astype(np.int64)


def _repair_empty(
    unit: NDArray[np.float64], labels: NDArray[np.int64], centroids: NDArray[np.float64], k: int
) -> NDArray[np.int64]:
    """Пустой кластер получает точку, наиболее удалённую от своего центроида."""
    labels = labels.copy()
    for j in range(k):
        if np.any(labels == j):
            continue
        dist = 1.0 - np.sum(unit * centroids[labels], axis=1)
        counts = np.bincount(labels, minlength=k)
        dist[counts[labels] <= 1] = -np.inf
        idx = int(np.argmax(dist))
        labels[idx] = j
        centroids[j] = unit[idx]
    return labels


def _centroids(
    unit: NDArray[np.float64], labels: NDArray[np.int64], previous: NDArray[np.float64], k: int
) -> NDArray[np.float64]:
    out = previous.copy()
    for j in range(k):
        s = unit[labels == j].sum(axis=0)
        norm = float(np.linalg.norm(s))
        if norm > 0.0:
            out[j] = s / norm
    return out


def _single_moves(unit: NDArray[np.float64], labels: NDArray[np.int64], k: int) -> NDArray[np.int64]:
    """Перемещения одной точки, пока они строго уменьшают целевую функцию."""
    labels = labels.copy()
    sums = np.stack([unit[labels == j].sum(axis=0) for j in range(k)])
    counts = np.bincount(labels, minlength=k)
    improved = True
    while improved:
        improved = False
        for i, v in enumerate(unit):
            a = labels[i]
            if counts[a] <= 1:
                continue
            base = np.linalg.norm(sums[a]) + np.linalg.norm(sums, axis=1)
            gain = np.linalg.norm(sums[a] - v) + np.linalg.norm(sums + v, axis=1) - base
            gain[a] = 0.0
            b = int(np.argmax(gain))
            if gain[b] > 1e-12:
                sums[a] -= v
                sums[b] += v
                counts[a] -= 1
                counts[b] += 1
                labels[i] = b
                improved = True
    return labels


def _single_restart(
    unit: NDArray[np.float64], k: int, rng: np.random.Generator, max_iterations: int
) -> NDArray[np.int64]:
    centroids = _kmeans_pp(unit, k, rng)
    labels = _repair_empty(unit, _assign(unit, centroids), centroids, k)
    for _ in range(max_iterations):
        centroids = _centroids(unit, labels, centroids, k)
        new = _repair_empty(unit, _assign(unit, centroids), centroids, k)
        if np.array_equal(new, labels):
            break
        labels = new
    return _single_moves(unit, labels, k)


def kmeans_cosine(
    vectors,
    k: int = 2,
    seed: int = 0,
    restarts: int = 10,
    max_iterations: int = 100,
) -> NDArray[np.int64]:
    """
    Сферический k-means с косинусным расстоянием.

    Векторы нормируются один раз, центроиды перенормируются на каждом шаге,
    останов — когда разметка не меняется; затем одиночные перемещения точек
    доводят разметку до локального оптимума. Нулевые векторы относятся к
    кластеру 0 и не участвуют в пересчёте центроидов. Из перезапусков
    выбирается разметка с наименьшей целевой функцией, при равенстве — с
    меньшим номером перезапуска; подсемена — SeedSequence(seed).spawn(restarts).

    Raises:
        UsageError: M < k
    """
    x = as_matrix(vectors, name="vectors")
    m = x.shape[0]
    if k < 1 or restarts < 1:
        raise UsageError(f"k={k} и restarts={restarts} должны быть ≥ 1")
    if m < k:
        raise UsageError(f"k-means: векторов {m} меньше, чем кластеров {k}")
    unit, nonzero = _unit_rows(x)
    labels = np.zeros(m, dtype=np.int64)
    active = unit[nonzero]
    if len(active) <= k:
        labels[nonzero] = np.arange(len(active))
        return labels

    best: tuple[float, NDArray[np.int64]] | None = None
    for restart, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        candidate = _single_restart(active, k, np.random.default_rng(child), max_iterations)
        objective = cosine_objective(active, candidate, k)
        logger.debug(f"k-means перезапуск {restart}: целевая функция {objective:.6f}")
        if best is None or objective < best[0]:
            best = (objective, candidate)
    labels[nonzero] = best[1]
    return labels


def km_pca_diarize(embeddings, seed: int = 0, k: int = 2, restarts: int = 10) -> NDArray[np.int64]:
    """
    Полная базовая система: PCA по разговору, затем косинусный k-means.

    Raises:
        DataFormatError: В разговоре меньше max(2, k) сегментов
    """
    x = as_matrix(embeddings, name="embeddings")
    if x.shape[0] < max(2, k):
        raise DataFormatError(
            f"KM-PCA: в разговоре {x.shape[0]} сегментов, нужно хотя бы {max(2, k)}"
        )
    return kmeans_cosine(pca_project_half_energy(x), k=k, seed=seed, restarts=restarts)
