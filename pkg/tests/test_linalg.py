import numpy as np
import pytest
from scipy.stats import multivariate_normal

from vbdiar.errors import DimensionError, NumericalError
from vbdiar.linalg import as_matrix, chol, gaussian_logpdf, inverse_chol, ridge


def test_chol_rejects_indefinite():
    with pytest.raises(NumericalError):
        chol(np.array([[1.0, 2.0], [2.0, 1.0]]), "test")


def test_gaussian_logpdf_matches_scipy(rng):
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    mean = np.array([0.3, -0.7])
    x = rng.standard_normal((5, 2))
    expected = multivariate_normal(mean, cov).logpdf(x)
    np.testing.assert_allclose(gaussian_logpdf(x, mean, chol(cov)), expected, rtol=1e-10)
    assert gaussian_logpdf(x[0], mean, chol(cov)) == pytest.approx(expected[0], rel=1e-10)


def test_inverse_chol_is_symmetric_inverse():
    a = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]])
    inv = inverse_chol(chol(a))
    np.testing.assert_array_equal(inv, inv.T)
    np.testing.assert_allclose(inv @ a, np.eye(3), atol=1e-12)


def test_ridge_only_when_singular():
    good = np.eye(2)
    fixed, added = ridge(good, 1e-6)
    assert not added
    assert fixed is good

    singular = np.array([[1.0, 1.0], [1.0, 1.0]])
    fixed, added = ridge(singular, 1e-6)
    assert added
    np.testing.assert_allclose(fixed, singular + 1e-6 * np.eye(2))


def test_ridge_zero_trace():
    with pytest.raises(NumericalError):
        ridge(np.zeros((2, 2)), 1e-6)


def test_as_matrix_dimension_check():
    assert as_matrix([1.0, 2.0]).shape == (1, 2)
    with pytest.raises(DimensionError):
        as_matrix(np.zeros((3, 2)), dim=3)
