import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_density, random_state
from floqshadow.measurement import LocalBasis, OutcomeRecord, ReadoutModel, measure, sample_cue2, unitaries_from_seeds
from floqshadow.shadows import (
    ShadowRecord,
    ShadowSet,
    ShadowStore,
    accumulate_shadows,
    batch,
    build_shadow,
    build_shadows,
    correct_readout,
    cross_traces,
    partial_transpose,
    shadow_purities,
    symmetrize_charge,
    symmetrized_purities,
)
from floqshadow.statevector import QuantumState, reduce

PAULIS = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]


def kron_all(mats):
    out = np.eye(1)
    for m in mats:
        out = np.kron(out, m)
    return out


def dense_shadow(p, U):
    """Reference: sum over bitstrings of Kronecker products of 3 U^dag|s><s|U - I."""
    n = len(U)
    out = 0
    for s in range(2**n):
        bits = [(s >> (n - 1 - q)) & 1 for q in range(n)]
        ops = [3 * np.outer(U[q][b].conj(), U[q][b]) - np.eye(2) for q, b in enumerate(bits)]
        out = out + p[s] * kron_all(ops)
    return out


def ideal_probs(psi, U):
    return np.abs(kron_all(U) @ psi) ** 2


def q_mask(n):
    w = np.array([bin(i).count("1") for i in range(2**n)])
    return w[:, None] == w[None, :]


def pt_ref(mat, n, sites):
    """Partial transpose through the Pauli expansion: Y picks up a sign per transposed site."""
    out = 0
    for idx in itertools.product(range(4), repeat=n):
        P = kron_all([PAULIS[i] for i in idx])
        c = np.trace(P @ mat) / 2**n
        sign = (-1) ** sum(1 for q in sites if idx[q] == 2)
        out = out + sign * c * P
    return out


@given(st.integers(1, 4), st.integers(0, 2**31))
def test_build_shadows_matches_reference(n, seed):
    rng = np.random.default_rng(seed)
    U = sample_cue2(rng, size=(3, n))
    p = rng.dirichlet(np.ones(2**n), size=3)
    got = build_shadows(p, U)
    for m in range(3):
        assert np.allclose(got[m], dense_shadow(p[m], U[m]), atol=1e-12)


@given(st.integers(1, 6), st.integers(1, 30), st.integers(0, 2**31))
def test_accumulator_and_kernels_match_dense(n, M, seed):
    rng = np.random.default_rng(seed)
    U = sample_cue2(rng, size=(M, n))
    p = rng.normal(size=(M, 2**n))  # quasi-probabilities are allowed
    S = build_shadows(p, U)
    assert np.allclose(accumulate_shadows(p, U, chunk_bytes=4096), S.sum(axis=0), atol=1e-10)
    assert np.allclose(shadow_purities(p), np.einsum("mij,mji->m", S, S).real, atol=1e-9)
    Q = np.where(q_mask(n), S, 0)
    assert np.allclose(symmetrized_purities(p, U), np.einsum("mij,mji->m", Q, Q).real, atol=1e-9)
    p2 = rng.normal(size=(M, 2**n))
    U2 = sample_cue2(rng, size=(M, n))
    S2 = build_shadows(p2, U2)
    assert np.allclose(cross_traces(p, U, p2, U2), np.einsum("mij,mji->m", S, S2).real, atol=1e-9)


def test_zero_in_own_basis():
    basis = LocalBasis.identity(1)
    p = measure(QuantumState.zero(1), basis).probabilities()
    S = build_shadows(p[None], basis.unitaries[None])[0]
    assert np.allclose(S, np.diag([2, -1]))


@given(st.integers(1, 4), st.integers(0, 2**31))
def test_shadow_is_hermitian_with_unit_trace(n, seed):
    rng = np.random.default_rng(seed)
    U = sample_cue2(rng, size=(2, n))
    p = rng.dirichlet(np.ones(2**n), size=2)
    S = build_shadows(p, U)
    assert np.allclose(np.trace(S, axis1=1, axis2=2), 1)
    assert np.allclose(S, S.conj().transpose(0, 2, 1))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_shadow_mean_is_unbiased(n):
    rng = np.random.default_rng(10 + n)
    rho = random_density(2**n, rng, rank=2)
    M = 10_000
    U = sample_cue2(rng, size=(M, n))
    V = np.stack([kron_all(u) for u in U])
    p = np.einsum("mij,jk,mik->mi", V, rho, V.conj()).real
    mean = accumulate_shadows(p, U) / M
    assert np.abs(mean - rho).max() <= 5 / np.sqrt(M)


def test_single_qubit_zero_state_shadow_mean():
    seeds = np.arange(10_000, dtype=np.uint64) * 7919 + 1
    U = unitaries_from_seeds(seeds, 1)
    p = np.abs(U[:, :, :, 0]) ** 2  # |<s|U|0>|^2
    mean = accumulate_shadows(p.reshape(-1, 2), U) / len(seeds)
    assert np.abs(mean - np.diag([1, 0])).max() <= 0.02


def test_correct_readout_example():
    rec = ShadowRecord(5, OutcomeRecord(1, exact_probs=np.array([0.9, 0.1])))
    C = ReadoutModel.uniform(1, e01=0.1).confusion()
    assert np.allclose(correct_readout(rec, C).outcome.probabilities(), [1, 0])


@given(st.integers(1, 4), st.integers(0, 2**31))
def test_correct_readout_inverts_confusion(L, seed):
    rng = np.random.default_rng(seed)
    model = ReadoutModel(rng.uniform(0, 0.2, L), rng.uniform(0, 0.2, L))
    psi = random_state(L, rng)
    basis = LocalBasis(sample_cue2(rng, size=L), 0)
    noisy = measure(QuantumState(psi, L), basis, readout=model)
    fixed = correct_readout(ShadowRecord(0, noisy), model.confusion()).outcome.probabilities()
    assert abs(fixed.sum() - 1) <= 1e-12
    assert np.allclose(fixed, ideal_probs(psi, basis.unitaries), atol=1e-12)


def test_singular_confusion_is_rejected():
    C = np.array([[[0.5, 0.5], [0.5, 0.5]]])
    rec = ShadowRecord(0, OutcomeRecord(1, exact_probs=np.array([0.5, 0.5])))
    with pytest.raises(ValueError, match="singular"):
        correct_readout(rec, C)


def test_batching_floor_rule():
    arr = np.arange(23, dtype=float).reshape(23, 1, 1)
    b = batch(arr, 5)
    assert len(b) == 5 and b[0].n_batches == 5
    assert np.allclose([x.matrix[0, 0] for x in b], [1.5, 5.5, 9.5, 13.5, 17.5])  # last 3 dropped
    for B in (1, 24):
        with pytest.raises(ValueError):
            batch(arr, B)
    ss = ShadowSet(np.full((23, 2), 0.5), sample_cue2(0, size=(23, 1)), (0,))
    S = ss.matrices()
    assert np.allclose(ss.batches(5), S[:20].reshape(5, 4, 2, 2).mean(axis=1))
    assert np.allclose(ss.total(), S.sum(axis=0))
    with pytest.raises(ValueError):
        ss.batches(24)


@given(st.integers(1, 4), st.integers(0, 2**31), st.data())
def test_partial_transpose_properties(n, seed, data):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    sites = data.draw(st.lists(st.integers(0, n - 1), unique=True))
    T = partial_transpose(X, sites)
    assert np.allclose(partial_transpose(T, sites), X)
    assert np.allclose(T, pt_ref(X, n, sites), atol=1e-10)
    assert np.array_equal(partial_transpose(X, []), X)


def test_partial_transpose_of_product_and_support():
    rng = np.random.default_rng(3)
    a, b = random_density(2, rng), random_density(4, rng)
    assert np.allclose(partial_transpose(np.kron(a, b), [0]), np.kron(a.T, b))
    shadow = build_shadow(ShadowRecord(11, OutcomeRecord(3, exact_probs=np.full(8, 1 / 8))), [0, 2])
    assert shadow.sites == (0, 2)
    assert np.allclose(shadow.partial_transpose([2]), partial_transpose(shadow.matrix, [1]))
    with pytest.raises(ValueError, match="support"):
        shadow.partial_transpose([1])


def test_symmetrize_charge():
    plus = np.full((2, 2), 0.5)
    assert np.allclose(symmetrize_charge(plus), np.eye(2) / 2)
    rng = np.random.default_rng(0)
    X = random_density(8, rng)
    Q = symmetrize_charge(X)
    assert np.allclose(symmetrize_charge(Q), Q)
    assert np.allclose(Q, np.where(q_mask(3), X, 0))


def test_linear_transforms_commute_with_averaging():
    rng = np.random.default_rng(1)
    U = sample_cue2(rng, size=(40, 3))
    p = rng.dirichlet(np.ones(8), size=40)
    S = build_shadows(p, U)
    for f in (lambda x: partial_transpose(x, [1]), symmetrize_charge):
        assert np.allclose(f(S.mean(axis=0)), np.mean([f(s) for s in S], axis=0))


def test_shadow_set_restrict_matches_store_marginal():
    rng = np.random.default_rng(2)
    L, M = 4, 2000
    seeds = rng.integers(0, 2**63, size=M, dtype=np.uint64)
    psi = random_state(L, rng)
    U = unitaries_from_seeds(seeds, L)
    probs = np.stack([ideal_probs(psi, U[m]) for m in range(M)])
    store = ShadowStore(L, seeds, probs=probs)
    full = store.shadow_set(range(L))
    sub = full.restrict((1, 3))
    direct = store.shadow_set((1, 3))
    assert np.allclose(sub.probs, direct.probs) and np.array_equal(sub.unitaries, direct.unitaries)
    assert np.allclose(build_shadow(store.record(0), (1, 3)).matrix, direct.matrices()[0])
    rho = reduce(QuantumState(psi, L), (1, 3)).matrix
    assert np.abs(direct.total() / M - rho).max() <= 5 / np.sqrt(M)


@pytest.mark.parametrize("mode", ["exact", "counts"])
def test_store_roundtrip(tmp_path, mode):
    rng = np.random.default_rng(4)
    L, M = 3, 6
    seeds = rng.integers(0, 2**63, size=M, dtype=np.uint64)
    if mode == "exact":
        store = ShadowStore(L, seeds, 42, 7, probs=rng.dirichlet(np.ones(8), size=M))
    else:
        counts = []
        for _ in range(M):
            c = rng.multinomial(100, np.full(8, 1 / 8))
            nz = np.flatnonzero(c)
            counts.append((nz, c[nz]))
        store = ShadowStore(L, seeds, 42, 7, counts=counts)
    path = tmp_path / "s.fqss"
    store.write(path)
    raw = path.read_bytes()
    assert raw[:4] == b"FQSS"
    back = ShadowStore.read(path)
    assert (back.L, back.M, back.seed, back.state_id, back.mode) == (L, M, 42, 7, store.mode)
    assert back.K == (0 if mode == "exact" else 100)
    assert np.array_equal(back.basis_seeds, seeds)
    assert np.array_equal(back.probabilities(), store.probabilities())
    back.write(tmp_path / "t.fqss")
    assert (tmp_path / "t.fqss").read_bytes() == raw


def test_store_rejects_bad_files(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(ValueError, match="not a shadow store"):
        ShadowStore.read(p)
    with pytest.raises(ValueError):
        ShadowStore(1, [1, 2], probs=np.full((1, 2), 0.5))
