"""
Линейная алгебра на факторах Холецкого.

Все гауссовы плотности считаются в логарифмической шкале через разложение
Холецкого; явные обращения матриц в путях вычисления плотностей не используются.
"""

import logging

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .errors import DimensionError, NumericalError

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


def as_vector(x, dim: int | None = None, name: str = "x") -> NDArray[np.float64]:
    """Привести вход к одномерному float64-вектору с проверкой размерности."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name}: ожидался вектор, получена форма {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"{name}: ожидалась размерность {dim}, получена {v.shape[0]}")
    return v


def as_matrix(x, dim: int | None = None, name: str = "X") -> NDArray[np.float64]:
    """Привести вход к двумерному массиву (N, D) с проверкой второй размерности."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[np.newaxis, :]
    if a.ndim != 2:
        raise DimensionError(f"{name}: ожидалась матрица, получена форма {a.shape}")
    if dim is not None and a.shape[1] != dim:
        raise DimensionError(f"{name}: ожидалась размерность {dim}, получена {a.shape[1]}")
    return a


def is_symmetric(a: NDArray[np.float64], rtol: float = 1e-10) -> bool:
    """Симметричность с относительным допуском."""
    scale = max(float(np.max(np.abs(a))), 1e-300)
    return bool(np.max(np.abs(a - a.T)) <= rtol * scale)


def symmetrize(a: NDArray[np.float64]) -> NDArray[np.float64]:
    return 0.5 * (a + a.T)


def chol(a: NDArray[np.float64], name: str = "matrix") -> NDArray[np.float64]:
    """
    Нижний фактор Холецкого.

    Raises:
        NumericalError: Матрица не положительно определена
    """
    try:
        return cholesky(a, lower=True)
    except (LinAlgError, ValueError) as e:
        raise NumericalError(f"Разложение Холецкого для {name} не удалось: {e}") from e


def logdet_chol(factor: NDArray[np.float64]) -> float:
    """log|A| по нижнему фактору Холецкого."""
    return 2.0 * float(np.sum(np.log(np.diag(factor))))


def solve_chol(factor: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
    """Решение A x = b по нижнему фактору A."""
    return cho_solve((factor, True), b)


def inverse_chol(factor: NDArray[np.float64]) -> NDArray[np.float64]:
    """A⁻¹ через решение против столбцов единичной матрицы."""
    return symmetrize(solve_chol(factor, np.eye(factor.shape[0])))


def gaussian_logpdf(
    x: NDArray[np.float64], mean: NDArray[np.float64], cov_factor: NDArray[np.float64]
) -> NDArray[np.float64] | float:
    """
    log N(x; mean, Σ), где Σ = L Lᵀ задана нижним фактором.

    Args:
        x: Вектор (D,) или матрица строк (N, D)
        mean: Вектор среднего (D,)
        cov_factor: Нижний фактор Холецкого ковариации

    Returns:
        Скаляр для вектора, массив (N,) для матрицы
    """
    d = cov_factor.shape[0]
    diff = np.atleast_2d(x) - mean
    z = solve_triangular(cov_factor, diff.T, lower=True)
    maha = np.sum(z * z, axis=0)
    out = -0.5 * (d * LOG_2PI + logdet_chol(cov_factor) + maha)
    return float(out[0]) if np.ndim(x) == 1 else out


def ridge(
    scatter: NDArray[np.float64], scale: float, name: str = "scatter"
) -> tuple[NDArray[np.float64], bool]:
    """
    Добавить гребневую поправку scale * trace / D к диагонали, если матрица вырождена.

    Returns:
        Пара (матрица, была ли добавлена поправка)
    """
    try:
        cholesky(scatter, lower=True)
        return scatter, False
    except (LinAlgError, ValueError):
        pass
    d = scatter.shape[0]
    trace = float(np.trace(scatter))
    if not np.isfinite(trace) or trace <= 0.0:
        raise NumericalError(f"{name}: нулевой след, гребневая поправка невозможна")
    eps = scale * trace / d
    logger.warning(f"{name} вырождена, добавлена гребневая поправка {eps:.3e}")
    return scatter + eps * np.eye(d), True
