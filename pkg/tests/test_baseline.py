import numpy as np
import pytest
from oracles import same_partition

from vbdiar.baseline import (
    cosine_objective,
    energy_dim,
    km_pca_diarize,
    kmeans_cosine,
    pca_project_half_energy,
)
from vbdiar.errors import DataFormatError, NumericalError, UsageError


@pytest.mark.parametrize(
    ("eigenvalues", "expected"),
    [
        ([4.0, 3.0, 2.0, 1.0], 2),
        ([5.0, 3.0, 2.0], 1),
        ([1.0, 1.0, 1.0, 1.0], 2),
        ([1.0, 2.0, 7.0], 1),
        ([0.0, 0.0, 3.0], 1),
        ([4.0, 2.0, 1.0, 1.0], 1),
        ([1.0] * 6, 3),
    ],
)
def test_energy_dim(eigenvalues, expected):
    assert energy_dim(eigenvalues) == expected


def test_energy_dim_zero_total():
    with pytest.raises(NumericalError):
        energy_dim([0.0, 0.0])


def test_pca_projection(rng):
    x = rng.standard_normal((50, 6)) * np.array([5.0, 3.0, 1.0, 0.5, 0.2, 0.1]) + 10.0
    y = pca_project_half_energy(x)
    assert y.shape[0] == 50
    assert 1 <= y.shape[1] < 6
    np.testing.assert_allclose(y.mean(axis=0), 0.0, atol=1e-9)
    gram = y.T @ y
    np.testing.assert_allclose(gram - np.diag(np.diag(gram)), 0.0, atol=1e-8)


def test_pca_rejects_degenerate_input():
    with pytest.raises(UsageError):
        pca_project_half_energy(np.ones((1, 3)))
    with pytest.raises(NumericalError):
        pca_project_half_energy(np.ones((4, 3)))


def test_cosine_objective_hand_example():
    vectors = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]])
    assert cosine_objective(vectors, [0, 0, 1]) == pytest.approx(2.0 - np.sqrt(2.0))
    assert cosine_objective(vectors, [0, 1, 0]) == pytest.approx(0.0)


def test_kmeans_separates_directions(rng):
    a = np.array([1.0, 0.2, 0.0]) + 0.05 * rng.standard_normal((10, 3))
    b = np.array([0.0, -0.3, 1.0]) + 0.05 * rng.standard_normal((10, 3))
    x = np.concatenate([a, b])
    labels = kmeans_cosine(x, seed=3)
    assert same_partition(labels, [0] * 10 + [1] * 10)


def test_kmeans_invariant_to_positive_rescaling(rng):
    x = rng.standard_normal((30, 4))
    # Степени двойки масштабируют без округления
    scales = 2.0 ** rng.integers(-3, 4, size=(30, 1))
    np.testing.assert_array_equal(kmeans_cosine(x * scales, seed=2), kmeans_cosine(x, seed=2))


def test_kmeans_deterministic(rng):
    x = rng.standard_normal((30, 4))
    np.testing.assert_array_equal(kmeans_cosine(x, seed=7), kmeans_cosine(x, seed=7))


def test_kmeans_single_point_moves_cannot_improve(rng):
    x = rng.standard_normal((25, 3))
    labels = kmeans_cosine(x, seed=1, restarts=3)
    base = cosine_objective(x, labels, 2)
    counts = np.bincount(labels, minlength=2)
    for i in range(len(x)):
        if counts[labels[i]] <= 1:
            continue
        moved = labels.copy()
        moved[i] = 1 - moved[i]
        assert cosine_objective(x, moved, 2) >= base - 1e-9


def test_kmeans_zero_vectors_go_to_first_cluster():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.1], [0.1, 1.0]])
    labels = kmeans_cosine(x, seed=0)
    assert labels[0] == 0
    assert same_partition(labels[1:], [0, 1, 0, 1])


def test_kmeans_small_inputs():
    np.testing.assert_array_equal(kmeans_cosine(np.array([[1.0, 0.0], [0.0, 1.0]])), [0, 1])
    with pytest.raises(UsageError):
        kmeans_cosine(np.array([[1.0, 0.0]]))


def test_km_pca_diarize(rng):
    direction = rng.standard_normal(8)
    direction /= np.linalg.norm(direction)
    truth = np.array([0, 1] * 10)
    x = np.where(truth[:, np.newaxis] == 0, 3.0, -3.0) * direction + 0.3 * rng.standard_normal((20, 8))
    assert same_partition(km_pca_diarize(x, seed=0), truth)


def test_km_pca_diarize_single_segment_is_data_error():
    with pytest.raises(DataFormatError, match="сегмент"):
        km_pca_diarize(np.ones((1, 4)))
