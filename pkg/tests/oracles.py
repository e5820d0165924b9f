"""Независимые эталоны для тестов: сеточный DER, перебор отображений, сравнение разметок."""

import itertools

import numpy as np

from vbdiar.der import TurnList


def _speaker_at(turns: TurnList, t: float) -> str | None:
    for turn in turns.turns:
        if turn.start <= t < turn.end:
            return turn.speaker
    return None


def grid_der(reference: TurnList, hypothesis: TurnList, collar: float, step: float = 0.001) -> float:
    """DER по сетке с шагом step; каждая ячейка классифицируется по центру."""
    boundaries = sorted({b for t in reference.turns for b in (t.start, t.end)})
    end = max(t.end for t in (*reference.turns, *hypothesis.turns))
    ref_names = sorted({t.speaker for t in reference.turns})
    hyp_names = sorted({t.speaker for t in hypothesis.turns})
    joint = np.zeros((len(ref_names), len(hyp_names)))
    scored = errors = 0.0
    for k in range(int(np.ceil(end / step))):
        t = (k + 0.5) * step
        if any(abs(t - b) < collar for b in boundaries):
            continue
        r, h = _speaker_at(reference, t), _speaker_at(hypothesis, t)
        if r is None:
            errors += step if h is not None else 0.0
            continue
        scored += step
        if h is None:
            errors += step
        else:
            joint[ref_names.index(r), hyp_names.index(h)] += step
    best = brute_force_total(joint)
    return (errors + joint.sum() - best) / scored


def brute_force_total(overlap: np.ndarray) -> float:
    """Максимум суммы по всем инъективным отображениям гипотеза → эталон."""
    nr, nh = overlap.shape
    best = 0.0
    if nh <= nr:
        for perm in itertools.permutations(range(nr), nh):
            best = max(best, sum(overlap[perm[j], j] for j in range(nh)))
    else:
        for perm in itertools.permutations(range(nh), nr):
            best = max(best, sum(overlap[i, perm[i]] for i in range(nr)))
    return best


def same_partition(a, b) -> bool:
    """Совпадение двух разметок с двумя метками с точностью до перестановки."""
    a, b = np.asarray(a), np.asarray(b)
    return bool(np.array_equal(a, b) or np.array_equal(a, 1 - b))


def random_spd(rng: np.random.Generator, d: int, jitter: float = 0.5) -> np.ndarray:
    a = rng.standard_normal((d, d))
    return a @ a.T + jitter * np.eye(d)
