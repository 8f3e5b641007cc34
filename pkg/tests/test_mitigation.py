import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_density
from floqshadow.errors import DepolarizingModelError
from floqshadow.mitigation import (
    DepolarizingFit,
    fit_epsilon,
    mitigate,
    mitigate_purity,
    response_matrix,
    split_halves,
)
from floqshadow.statevector import apply_depolarizing, exact_moments


def test_response_matrix_example():
    R = response_matrix(2, 0.1, 4)
    assert np.allclose(R.entries, [[1, 0], [0.0475, 0.81]])
    assert np.allclose(R.apply([1, 1]), [1, 0.8575])


def test_fit_example():
    fit = fit_epsilon([0.8575], 4, [0])
    assert np.isclose(fit.eps, 0.1)
    assert fit.to_dict()["source_states"] == [0]


@given(st.integers(1, 4), st.floats(0, 0.95), st.integers(1, 4), st.integers(0, 2**31))
def test_response_matrix_matches_depolarized_moments(n, eps, rank_seed, seed):
    rng = np.random.default_rng(seed)
    d = 2 ** rng.integers(1, 4)
    rho = random_density(d, rng, rank=min(rank_seed, d))
    orders = range(1, n + 1)
    clean = exact_moments(rho, orders)
    noisy = exact_moments(apply_depolarizing(rho, eps), orders)
    pred = response_matrix(n, eps, d).apply([clean[k] for k in orders])
    assert np.allclose(pred, [noisy[k] for k in orders], atol=1e-10)


@given(st.integers(1, 4), st.floats(0, 0.9), st.integers(0, 2**31))
def test_round_trip(n, eps, seed):
    rng = np.random.default_rng(seed)
    d = 2 ** rng.integers(1, 4)
    rho = random_density(d, rng)
    z = np.array([exact_moments(rho, [k])[k] for k in range(1, n + 1)])
    noisy = response_matrix(n, eps, d).apply(z)
    assert np.allclose(mitigate(noisy, DepolarizingFit(eps, d), d), z, atol=1e-12)


def test_mitigate_purity_vectorized_and_dimension_override():
    fit = DepolarizingFit(0.2, 128)
    z = np.array([0.3, 0.5, 1.0])
    noisy = response_matrix(2, 0.2, 8).apply(np.column_stack([np.ones(3), z]))[:, 1]
    assert np.allclose(mitigate_purity(noisy, fit, 8), z)


def test_fit_rejects_inconsistent_data():
    with pytest.raises(DepolarizingModelError, match="below"):
        fit_epsilon([0.1], 4)
    with pytest.raises(DepolarizingModelError, match="exceeds"):
        fit_epsilon([1.05], 4)
    with pytest.raises(ValueError):
        fit_epsilon([0.5], 1)


def test_mitigate_errors():
    fit = DepolarizingFit(0.1, 4, (0, 1))
    with pytest.raises(ValueError, match="used to fit"):
        mitigate([[1, 0.8]], fit, state_ids=[1])
    with pytest.raises(ValueError, match="first moment"):
        mitigate([0.9, 0.8], fit)
    with pytest.raises(DepolarizingModelError):
        mitigate([1, 0.25], DepolarizingFit(1.0, 4))
    with pytest.raises(ValueError):
        response_matrix(5, 0.1, 4)
    with pytest.raises(ValueError):
        DepolarizingFit(1.5, 4)


def test_split_halves():
    assert split_halves(range(4)) == ((0, 1), (2, 3))
    assert split_halves([5, 6, 7]) == ((5, 6), (7,))
    with pytest.raises(ValueError):
        split_halves([0])
