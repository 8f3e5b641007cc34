import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_density, random_hermitian, random_state
from floqshadow.errors import NonPositiveMomentError
from floqshadow.estimators import (
    Estimate,
    asymmetry,
    ensemble_asymmetry,
    ensemble_entropy,
    ensemble_mean,
    fidelity,
    jackknife,
    overlap,
    p3_negativity,
    pt_moments,
    purity,
    r2_ratio,
    renyi2_entropy,
    sem,
    u_moment,
    u_trace_sum,
)
from floqshadow.measurement import sample_cue2
from floqshadow.qubits import symmetrize_charge
from floqshadow.shadows import ShadowSet
from floqshadow.statevector import QuantumState, pt_moments_exact, reduce


def kron_all(mats):
    out = np.eye(1)
    for m in mats:
        out = np.kron(out, m)
    return out


def brute_u(mats, n):
    total = 0
    for idx in itertools.permutations(range(len(mats)), n):
        P = np.eye(mats.shape[1])
        for i in idx:
            P = P @ mats[i]
        total += np.trace(P)
    return total


def shadow_set(rho, M, rng, sites=None):
    n = int(math.log2(rho.shape[0]))
    U = sample_cue2(rng, size=(M, n))
    V = np.stack([kron_all(u) for u in U])
    p = np.einsum("mij,jk,mik->mi", V, rho, V.conj()).real
    return ShadowSet(p, U, tuple(range(n)) if sites is None else tuple(sites))


@given(st.integers(1, 4), st.integers(4, 8), st.integers(1, 8), st.integers(0, 2**31))
def test_u_trace_sum_matches_brute_force(n, M, d, seed):
    mats = random_hermitian(M, d, np.random.default_rng(seed))
    ref = brute_u(mats, n)
    got = u_trace_sum(mats, n)
    assert abs(got - ref) <= 1e-10 * max(1.0, abs(ref))


def test_u_trace_sum_general_matrices():
    rng = np.random.default_rng(0)
    mats = rng.normal(size=(6, 3, 3)) + 1j * rng.normal(size=(6, 3, 3))
    for n in (2, 3, 4):
        assert abs(u_trace_sum(mats, n) - brute_u(mats, n)) <= 1e-9 * abs(brute_u(mats, n))


def test_u_trace_sum_errors():
    with pytest.raises(ValueError):
        u_trace_sum(np.zeros((3, 2, 2)), 5)
    with pytest.raises(ValueError):
        u_trace_sum(np.zeros((2, 2, 2)), 3)


def test_shadow_set_paths_match_dense_stack():
    rng = np.random.default_rng(1)
    ss = shadow_set(random_density(8, rng, rank=2), 60, rng)
    S = ss.matrices()
    assert np.isclose(u_moment(ss, 2).value, u_moment(S, 2).value, atol=1e-12)
    assert np.isclose(purity(ss, "charge").value, purity(symmetrize_charge(S)).value, atol=1e-12)
    batches = S.reshape(20, 3, 8, 8).mean(axis=1)
    assert np.isclose(u_moment(ss, 3).value, u_moment(batches, 3).value, atol=1e-12)
    assert u_moment(ss, 3).method == "batch-U"
    got = pt_moments(ss, [2], (2, 3, 4))
    ref2 = pt_moments(S, [2], (2,))[2].value
    ref34 = pt_moments(batches, [2], (3, 4))
    assert np.isclose(got[2].value, ref2, atol=1e-12)
    assert np.isclose(got[3].value, ref34[3].value, atol=1e-12)
    assert np.isclose(got[4].value, ref34[4].value, atol=1e-12)
    with pytest.raises(ValueError, match="support"):
        pt_moments(ss, [5])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_u_moment_is_unbiased(n):
    rng = np.random.default_rng(20 + n)
    rho = random_density(2, rng, rank=2)
    exact = np.trace(np.linalg.matrix_power(rho, n)).real
    est = np.array([u_moment(shadow_set(rho, 12, rng).matrices(), n).value for _ in range(2000)])
    assert abs(est.mean() - exact) <= 5 * est.std() / np.sqrt(len(est))


def test_pt_moments_converge_to_exact():
    rng = np.random.default_rng(5)
    state = QuantumState(random_state(3, rng), 3)
    rho_ab = reduce(state, (0, 2)).matrix
    ss = shadow_set(rho_ab, 20_000, rng, sites=(0, 2))
    got = pt_moments(ss, [2])
    exact = pt_moments_exact(state, [0], [2])
    for n in (2, 3, 4):
        assert abs(got[n].value - exact[n]) < 0.05


def test_batch_jackknife_sigma_tracks_spread():
    rng = np.random.default_rng(7)
    rho = random_density(4, rng, rank=1)
    runs = [purity(shadow_set(rho, 400, rng)) for _ in range(150)]
    spread = np.std([r.value for r in runs], ddof=1)
    typical = np.mean([r.sigma for r in runs])
    assert 0.7 < typical / spread < 1.4


def test_jackknife_of_mean_is_sem():
    x = np.random.default_rng(2).normal(size=25)
    mean, sigma = jackknife(x, np.mean)
    assert np.isclose(mean, x.mean())
    assert np.isclose(sigma, sem(x))
    with pytest.raises(ValueError):
        jackknife([1.0], np.mean)


def test_ensemble_estimators():
    z2 = np.array([0.2, 0.25, 0.3])
    e = ensemble_entropy(z2, n_bases=100)
    assert np.isclose(e.value, -math.log(0.25)) and e.method == "jackknife" and e.n_states == 3
    a = ensemble_asymmetry(z2, z2 * 1.5)
    assert np.isclose(a.value, -math.log(1.5))
    r = r2_ratio([0.5, 0.5], [0.25, 0.25], [0.125, 0.125])
    assert np.isclose(r.value, 1.0) and r.sigma == 0
    n = p3_negativity([0.5, 0.5], [0.5**2, 0.5**2])
    assert np.isclose(n.value, 0.0)
    m = ensemble_mean([1.0, 2.0, 3.0])
    assert m.value == 2 and np.isclose(m.sigma, 1 / math.sqrt(3))
    with pytest.raises(NonPositiveMomentError):
        ensemble_entropy([-0.1, 0.05])
    with pytest.raises(NonPositiveMomentError):
        r2_ratio([1, 1], [1, 1], [0, -1])
    with pytest.raises(NonPositiveMomentError):
        p3_negativity([1, 1], [-1, 0])
    with pytest.raises(ValueError):
        Estimate(1.0, -0.1)


def test_single_state_entropy_and_asymmetry():
    rng = np.random.default_rng(3)
    rho = random_density(4, rng, rank=1)
    ss = shadow_set(rho, 4000, rng)
    s = renyi2_entropy(ss)
    exact = -math.log(np.trace(rho @ rho).real)
    assert abs(s.value - exact) <= 4 * s.sigma
    a = asymmetry(ss)
    Q = symmetrize_charge(rho)
    exact_a = math.log(np.trace(rho @ rho).real) - math.log(np.trace(Q @ Q).real)
    assert abs(a.value - exact_a) <= 4 * a.sigma


def test_overlap_and_fidelity():
    rng = np.random.default_rng(4)
    a = shadow_set(random_density(4, rng, rank=1), 30, rng)
    b = shadow_set(random_density(4, rng, rank=1), 30, rng)
    Sa, Sb = a.matrices(), b.matrices()
    ref = sum(np.trace(Sa[i] @ Sb[j]) for i in range(30) for j in range(30) if i != j).real / (30 * 29)
    assert np.isclose(overlap(a, b), ref)
    assert np.isclose(overlap(Sa, Sb), ref)
    assert np.isclose(fidelity(a, a).value, 1.0)
    with pytest.raises(ValueError):
        overlap(Sa, Sb[:10])
