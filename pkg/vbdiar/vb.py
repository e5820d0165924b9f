"""
Вариационный Байес для PLDA-диаризации.

Аппроксимация Q(Y, I) = Q(Y) Q(I): сегментные апостериорные q_ms и
гауссовы апостериорные дикторов N(μ_s, C_s⁻¹) обновляются поочерёдно.
Вариант с детерминированным отжигом умножает дикторо-зависимые члены
на температуру β, которая растёт по расписанию до beta_max.
"""

import itertools
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import eigh
from scipy.special import softmax

from .errors import DimensionError, NumericalError
from .linalg import LOG_2PI, as_matrix, chol, inverse_chol, logdet_chol, solve_chol, symmetrize
from .plda import SpeakerPrior, TwoCovPlda

logger = logging.getLogger(__name__)

# Минимальный прирост свободной энергии для принятия выхода из симметричной точки
ESCAPE_MIN_GAIN = 1e-9


class AnnealSchedule(BaseModel):
    """Расписание температуры β для DA-VB."""

    model_config = ConfigDict(frozen=True)

    beta_init: float = Field(default=0.2, gt=0.0, le=1.0, description="Начальная температура")
    factor: float = Field(default=1.05, gt=1.0, description="Множитель β после каждого прохода")
    beta_max: float = Field(default=1.0, gt=0.0, le=1.0, description="Предельная температура")

    @model_validator(mode="after")
    def check_order(self) -> "AnnealSchedule":
        if self.beta_init > self.beta_max:
            raise ValueError("beta_init должно быть ≤ beta_max")
        return self

    def next_beta(self, beta: float) -> float:
        return min(beta * self.factor, self.beta_max)


class ConvergenceConfig(BaseModel):
    """Критерий останова: максимум проходов и порог изменения q."""

    model_config = ConfigDict(frozen=True)

    max_iterations: int = Field(default=100, gt=0, description="Максимум полных проходов")
    q_tolerance: float = Field(
        default=1e-6,
        ge=0.0,
        description="Порог max |Δq_ms| между проходами; 0 отключает ранний останов",
    )
    saddle_tolerance: float = Field(
        default=1e-6,
        ge=0.0,
        description="Порог max |q_ms − q_mt|, ниже которого два диктора считаются слипшимися; "
        "0 отключает выход из симметричной точки",
    )


@dataclass
class VbState:
    """
    Состояние VB.

    q — (M, S) сегментные апостериорные; speaker_means — (S, D);
    speaker_precisions — (S, D, D); beta — текущая температура.
    """

    q: NDArray[np.float64]
    speaker_means: NDArray[np.float64]
    speaker_precisions: NDArray[np.float64]
    beta: float = 1.0
    iteration: int = 0

    @property
    def num_segments(self) -> int:
        return int(self.q.shape[0])

    @property
    def num_speakers(self) -> int:
        return int(self.q.shape[1])

    def speaker_covariances(self) -> NDArray[np.float64]:
        """C_s⁻¹ решением против столбцов единичной матрицы, один раз на диктора."""
        return np.stack(
            [inverse_chol(chol(c, f"C_{s}")) for s, c in enumerate(self.speaker_precisions)]
        )

    def permuted(self, order: Sequence[int]) -> "VbState":
        """Состояние с переставленными метками дикторов."""
        idx = list(order)
        return replace(
            self,
            q=self.q[:, idx],
            speaker_means=self.speaker_means[idx],
            speaker_precisions=self.speaker_precisions[idx],
        )


class VbTrace(BaseModel):
    """Запись трассы одного прохода."""

    iteration: int
    beta: float
    free_energy: float
    max_q_delta: float
    escape: bool = False


@dataclass
class VbResult:
    """Итоговое состояние и трасса по проходам."""

    state: VbState
    trace: list[VbTrace] = field(default_factory=list)
    converged: bool = False
    escaped: bool = False


def _check_embeddings(model: TwoCovPlda, embeddings) -> NDArray[np.float64]:
    return as_matrix(embeddings, model.dim, "embeddings")


def _resolve_prior(prior: SpeakerPrior | None, num_speakers: int) -> SpeakerPrior:
    if prior is None:
        return SpeakerPrior.uniform(num_speakers)
    if prior.num_speakers != num_speakers:
        raise DimensionError(
            f"prior: {prior.num_speakers} дикторов, состояние: {num_speakers}"
        )
    return prior


def update_segment_posteriors(
    model: TwoCovPlda,
    embeddings,
    state: VbState,
    prior: SpeakerPrior | None = None,
) -> NDArray[np.float64]:
    """
    Обновить сегментные апостериорные q.

    log q̃_ms = β(μ_sᵀ𝓛φ_m − ½tr(𝓛(C_s⁻¹ + μ_sμ_sᵀ))) + log π_s, затем
    нормировка по s через softmax со сдвигом на максимум. Дикторо-независимая
    константа не вычисляется.

    Raises:
        NumericalError: Нечисловые промежуточные значения
    """
    x = _check_embeddings(model, embeddings)
    prior = _resolve_prior(prior, state.num_speakers)
    means = state.speaker_means
    covs = state.speaker_covariances()
    within = model.within_precision
    # tr(𝓛(C⁻¹ + μμᵀ)) по всем дикторам
    traces = np.einsum("ij,sji->s", within, covs) + np.einsum("si,ij,sj->s", means, within, means)
    scores = state.beta * (x @ within @ means.T - 0.5 * traces) + prior.log_pi
    if not np.all(np.isfinite(scores) | np.isneginf(scores)):
        raise NumericalError("Сегментные апостериорные: нечисловые значения")
    return softmax(scores, axis=1)


def update_speaker_posteriors(
    model: TwoCovPlda, embeddings, state: VbState
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Обновить гауссовы апостериорные дикторов.

    C_s = β(Λ + Σ_m q_ms 𝓛), μ_s = C_s⁻¹ β(Λμ + Σ_m q_ms 𝓛 φ_m).
    β сокращается в μ_s, поэтому μ_s решается по неотмасштабированной точности.

    Returns:
        Пара (speaker_means (S, D), speaker_precisions (S, D, D))
    """
    x = _check_embeddings(model, embeddings)
    if state.q.shape[0] != x.shape[0]:
        raise DimensionError(f"q: {state.q.shape[0]} сегментов, вложений {x.shape[0]}")
    counts = state.q.sum(axis=0)
    first_order = state.q.T @ x
    prior_term = model.between_precision @ model.mu
    means = np.empty((state.num_speakers, model.dim))
    precisions = np.empty((state.num_speakers, model.dim, model.dim))
    for s in range(state.num_speakers):
        unscaled = symmetrize(model.between_precision + counts[s] * model.within_precision)
        factor = chol(unscaled, f"C_{s}")
        rhs = prior_term + model.within_precision @ first_order[s]
        means[s] = solve_chol(factor, rhs)
        precisions[s] = state.beta * unscaled
    return means, precisions


def free_energy(
    model: TwoCovPlda,
    embeddings,
    state: VbState,
    prior: SpeakerPrior | None = None,
) -> float:
    """
    Свободная энергия (ELBO) при β = 1.

    E_Q[log p(Φ, Y, I)] + H[Q(I)] + H[Q(Y)]; нижняя граница log-evidence.
    """
    x = _check_embeddings(model, embeddings)
    prior = _resolve_prior(prior, state.num_speakers)
    q = state.q
    d = model.dim
    covs = state.speaker_covariances()
    means = state.speaker_means
    lam, big_l = model.between_precision, model.within_precision
    logdet_l = logdet_chol(model.within_factor)
    logdet_lam = logdet_chol(model.between_factor)

    # E[log N(φ_m; y_s, 𝓛⁻¹)] для всех (m, s)
    diff = x[:, np.newaxis, :] - means[np.newaxis, :, :]
    maha = np.einsum("msi,ij,msj->ms", diff, big_l, diff)
    tr_l = np.einsum("ij,sji->s", big_l, covs)
    expected_loglik = -0.5 * (d * LOG_2PI - logdet_l + maha + tr_l)

    with np.errstate(divide="ignore", invalid="ignore"):
        log_pi = prior.log_pi
        prior_term = np.where(q > 0.0, q * log_pi, 0.0)
        entropy_i = -np.where(q > 0.0, q * np.log(q), 0.0)

    dev = means - model.mu
    speaker_prior = -0.5 * (
        d * LOG_2PI
        - logdet_lam
        + np.einsum("si,ij,sj->s", dev, lam, dev)
        + np.einsum("ij,sji->s", lam, covs)
    )
    entropy_y = np.array(
        [0.5 * d * (1.0 + LOG_2PI) - 0.5 * logdet_chol(chol(c, "C_s")) for c in state.speaker_precisions]
    )
    total = (
        np.sum(q * expected_loglik)
        + np.sum(prior_term)
        + np.sum(entropy_i)
        + np.sum(speaker_prior)
        + np.sum(entropy_y)
    )
    return float(total)


def map_assignment(state: VbState) -> list[int]:
    """Argmax по s для каждого сегмента; при равенстве — меньший индекс."""
    return [int(i) for i in np.argmax(state.q, axis=1)]


def _validate_q(q: NDArray[np.float64], num_segments: int) -> NDArray[np.float64]:
    q = np.array(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != num_segments or q.shape[1] < 1:
        raise DimensionError(f"init: ожидалась матрица ({num_segments}, S), получена форма {q.shape}")
    if np.any(q < 0.0) or np.any(np.abs(q.sum(axis=1) - 1.0) > 1e-12):
        raise DimensionError("init: строки q должны быть стохастическими")
    return q


@dataclass(frozen=True)
class SpeakerPosteriors:
    """Апостериорные дикторов как начальное приближение: (S, D) и (S, D, D)."""

    means: NDArray[np.float64]
    precisions: NDArray[np.float64]


def run_vb(
    model: TwoCovPlda,
    embeddings,
    init: NDArray[np.float64] | SpeakerPosteriors,
    schedule: AnnealSchedule | None = None,
    config: ConvergenceConfig | None = None,
    prior: SpeakerPrior | None = None,
    trace: bool = False,
) -> VbResult:
    """
    Поочерёдные обновления VB до сходимости.

    Если после сходимости два диктора слиплись в симметричной неподвижной
    точке, их масса разводится по главной оси и VB перезапускается; результат
    перезапуска принимается только при росте свободной энергии (escaped=True,
    записи трассы с escape=True).

    Args:
        model: PLDA-модель
        embeddings: Вложения сегментов (M, D)
        init: Матрица q (M, S) — тогда первый шаг дикторский, либо
            SpeakerPosteriors — тогда первый шаг сегментный
        schedule: Расписание отжига; None — β = 1 на всём пути
        config: Критерий останова
        prior: Априорное π; по умолчанию равномерное
        trace: Записывать ли трассу по проходам

    Returns:
        VbResult с итоговым состоянием

    Raises:
        DimensionError: Неверная форма начального приближения
    """
    x = _check_embeddings(model, embeddings)
    config = config or ConvergenceConfig()
    beta = schedule.beta_init if schedule is not None else 1.0
    beta_max = schedule.beta_max if schedule is not None else 1.0

    if isinstance(init, SpeakerPosteriors):
        means = as_matrix(init.means, model.dim, "init.means")
        precisions = np.array(init.precisions, dtype=np.float64)
        if precisions.shape != (means.shape[0], model.dim, model.dim):
            raise DimensionError(f"init.precisions: неверная форма {precisions.shape}")
        s = means.shape[0]
        state = VbState(
            q=np.full((x.shape[0], s), 1.0 / s),
            speaker_means=means,
            speaker_precisions=precisions,
            beta=beta,
        )
        segment_first = True
        previous_q: NDArray[np.float64] | None = None
    else:
        q = _validate_q(init, x.shape[0])
        s = q.shape[1]
        state = VbState(
            q=q,
            speaker_means=np.tile(model.mu, (s, 1)),
            speaker_precisions=np.tile(model.between_precision, (s, 1, 1)),
            beta=beta,
        )
        segment_first = False
        previous_q = q
    prior = _resolve_prior(prior, s)

    result = VbResult(state=state)
    result.converged = _sweep(
        model, x, state, prior, schedule, config, result, trace, beta, segment_first, previous_q
    )

    if result.converged and s > 1:
        _escape_saddle(model, x, result, prior, beta_max, config, trace)
    return result


def _sweep(
    model: TwoCovPlda,
    x: NDArray[np.float64],
    state: VbState,
    prior: SpeakerPrior,
    schedule: AnnealSchedule | None,
    config: ConvergenceConfig,
    result: VbResult,
    trace: bool,
    beta: float,
    segment_first: bool,
    previous_q: NDArray[np.float64] | None,
    escape: bool = False,
) -> bool:
    """Проходы VB над state на месте; True, если сработал порог по q."""
    beta_max = schedule.beta_max if schedule is not None else beta
    offset = len(result.trace)
    for it in range(1, config.max_iterations + 1):
        state.beta = beta
        if segment_first:
            state.q = update_segment_posteriors(model, x, state, prior)
            state.speaker_means, state.speaker_precisions = update_speaker_posteriors(model, x, state)
        else:
            state.speaker_means, state.speaker_precisions = update_speaker_posteriors(model, x, state)
            state.q = update_segment_posteriors(model, x, state, prior)
        delta = np.inf if previous_q is None else float(np.max(np.abs(state.q - previous_q)))
        previous_q = state.q
        state.iteration = it

        if trace:
            result.trace.append(
                VbTrace(
                    iteration=offset + it,
                    beta=beta,
                    free_energy=free_energy(model, x, state, prior),
                    max_q_delta=delta,
                    escape=escape,
                )
            )
        logger.debug(f"VB проход {it}: β={beta:.4f}, max|Δq|={delta:.3e}")

        if beta < beta_max:
            beta = schedule.next_beta(beta)
            continue
        if delta < config.q_tolerance:
            return True
    return False


def _coincident_pair(q: NDArray[np.float64], tolerance: float) -> tuple[int, int] | None:
    """Первая пара дикторов с совпадающими столбцами q и суммарной массой не меньше 1."""
    mass = q.sum(axis=0)
    for s, t in itertools.combinations(range(q.shape[1]), 2):
        if mass[s] + mass[t] >= 1.0 and float(np.max(np.abs(q[:, s] - q[:, t]))) < tolerance:
            return s, t
    return None


def _split_pair(
    model: TwoCovPlda, x: NDArray[np.float64], q: NDArray[np.float64], s: int, t: int
) -> NDArray[np.float64]:
    """
    Развести массу пары (s, t) по главной оси разброса в метрике 𝓛.

    Сегменты по разные стороны от взвешенного центра получают доли 3/4 и 1/4;
    суммы строк q сохраняются.
    """
    weights = q[:, s] + q[:, t]
    centre = weights @ x / weights.sum()
    z = (x - centre) @ model.within_factor
    _, vectors = eigh((z * weights[:, np.newaxis]).T @ z)
    share = 0.5 + 0.25 * np.sign(z @ vectors[:, -1])
    split = q.copy()
    split[:, s] = weights * share
    split[:, t] = weights * (1.0 - share)
    return split


def _escape_saddle(
    model: TwoCovPlda,
    x: NDArray[np.float64],
    result: VbResult,
    prior: SpeakerPrior,
    beta: float,
    config: ConvergenceConfig,
    trace: bool,
) -> None:
    """
    Выход из симметричной неподвижной точки.

    Если два диктора слиплись (одинаковые столбцы q), их масса разводится
    по главной оси и VB перезапускается при β = beta_max. Новое состояние
    принимается, только если свободная энергия выросла больше ESCAPE_MIN_GAIN.
    """
    pair = _coincident_pair(result.state.q, config.saddle_tolerance)
    if pair is None:
        return
    q = _split_pair(model, x, result.state.q, *pair)
    s = q.shape[1]
    candidate = VbState(
        q=q,
        speaker_means=np.tile(model.mu, (s, 1)),
        speaker_precisions=np.tile(model.between_precision, (s, 1, 1)),
        beta=beta,
    )
    attempt = VbResult(state=candidate, trace=list(result.trace))
    converged = _sweep(model, x, candidate, prior, None, config, attempt, trace, beta, False, q, escape=True)

    before = free_energy(model, x, result.state, prior)
    after = free_energy(model, x, candidate, prior)
    if after <= before + ESCAPE_MIN_GAIN:
        logger.debug(f"Выход из симметричной точки {pair} отклонён: F {before:.6f} → {after:.6f}")
        return
    logger.debug(f"Выход из симметричной точки {pair}: F {before:.6f} → {after:.6f}")
    candidate.iteration += result.state.iteration
    result.state = candidate
    result.trace = attempt.trace
    result.converged = converged
    result.escaped = True
