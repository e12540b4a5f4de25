import numpy as np
import pytest

from csgm import _kernels
from csgm._kernels import get_kernels, numba_available

from conftest import random_spd

needs_numba = pytest.mark.skipif(not numba_available(), reason="numba not installed")


def _problem(seed, n=40, d=4, k=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    means = rng.normal(size=(k, d))
    chols = np.stack([np.linalg.cholesky(random_spd(rng, d)) for _ in range(k)])
    log_w = np.log(rng.dirichlet(np.ones(k)))
    return X, means, chols, log_w


def test_backend_flag_is_valid():
    assert _kernels.BACKEND in ("numba", "numpy")


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_kernels("cuda")


@needs_numba
@pytest.mark.parametrize("seed", range(5))
def test_density_paths_agree(seed):
    X, means, chols, log_w = _problem(seed)
    a = get_kernels("numba").weighted_log_density(X, means, chols, log_w)
    b = get_kernels("numpy").weighted_log_density(X, means, chols, log_w)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-10)


@needs_numba
def test_normalize_paths_agree():
    rng = np.random.default_rng(3)
    lp = rng.normal(scale=300, size=(50, 6))
    ra, na = get_kernels("numba").log_normalize_rows(lp)
    rb, nb = get_kernels("numpy").log_normalize_rows(lp)
    np.testing.assert_allclose(ra, rb, atol=1e-14)
    np.testing.assert_allclose(na, nb, rtol=1e-14)
    np.testing.assert_allclose(ra.sum(axis=1), 1.0, atol=1e-12)


@needs_numba
def test_neighbour_paths_agree_with_ties():
    rng = np.random.default_rng(5)
    P = rng.integers(0, 3, size=(60, 2)).astype(float)  # many exact ties
    a = get_kernels("numba").nearest_neighbours(P)
    b = get_kernels("numpy").nearest_neighbours(P)
    np.testing.assert_array_equal(a, b)


def test_neighbour_ties_go_to_lowest_index():
    P = np.array([[0.0], [1.0], [-1.0], [1.0]])
    nn = get_kernels("numpy").nearest_neighbours(P)
    assert nn.tolist() == [1, 3, 0, 1]


def test_normalize_handles_extreme_logs():
    lp = np.array([[-1e4, -1e4 + 1.0], [800.0, 0.0]])
    resp, norm = get_kernels("numpy").log_normalize_rows(lp)
    assert np.all(np.isfinite(resp)) and np.all(np.isfinite(norm))
    np.testing.assert_allclose(resp[0], [1 / (1 + np.e), np.e / (1 + np.e)])
