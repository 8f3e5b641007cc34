import numpy as np
import pytest
from functools import reduce as fold
from hypothesis import given, strategies as st

from floqshadow.errors import ConfigError, FloquetError
from floqshadow.floquet import (
    DisorderRealization,
    ModelParams,
    build_floquet,
    build_hamiltonian,
    expm_hermitian,
    sample_disorder,
)

I2 = np.eye(2)
PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]]),
    "z": np.diag([1.0, -1.0]).astype(complex),
}
SP = np.array([[0, 1], [0, 0]], dtype=complex)  # sigma+ = |0><1|


def site_op(op, l, L):
    return fold(np.kron, [op if q == l else I2 for q in range(L)])


def kron_hamiltonian(axis, J, h):
    """Reference construction from explicit Kronecker products."""
    L = len(h)
    H = np.zeros((2**L, 2**L), dtype=complex)
    for l in range(L - 1):
        hop = site_op(SP, l, L) @ site_op(SP.conj().T, l + 1, L)
        H += J * (hop + hop.conj().T)
    for l in range(L):
        H += h[l] * site_op(PAULI[axis], l, L)
    return H


def realization(L, fields):
    h = {a: np.zeros(L) for a in "xyz"}
    h.update({a: np.asarray(v, float) for a, v in fields.items()})
    return DisorderRealization(h["x"], h["y"], h["z"])


def test_single_site_without_field_is_zero():
    p = ModelParams(1)
    for axis in "xyz":
        assert np.all(build_hamiltonian(axis, p, realization(1, {})) == 0)


def test_two_site_hopping_element():
    H = build_hamiltonian("z", ModelParams(2), realization(2, {}))
    # |01> is index 1, |10> index 2
    assert H[1, 2] == 1 and H[2, 1] == 1
    assert np.count_nonzero(H) == 2


def test_two_site_x_field_spectrum_in_weak_coupling_limit():
    a, b = 0.3, 0.7
    H = build_hamiltonian("x", ModelParams(2, J=1e-15), realization(2, {"x": [a, b]}))
    expected = sorted([a + b, a - b, -a + b, -a - b])
    assert np.allclose(np.linalg.eigvalsh(H), expected, atol=1e-12)


@given(st.integers(1, 5), st.sampled_from("xyz"), st.integers(0, 2**31))
def test_matches_kronecker_reference(L, axis, seed):
    p = ModelParams(L, J=0.8, seed=seed)
    dis = sample_disorder(p, 3)
    H = build_hamiltonian(axis, p, dis)
    assert np.allclose(H, kron_hamiltonian(axis, 0.8, dis.field(axis)), atol=1e-12)
    assert np.abs(H - H.conj().T).max() <= 1e-12


def test_pi_half_x_kick():
    T = 3.0
    p = ModelParams(1, T=T)
    V = build_floquet(p, realization(1, {"x": [np.pi * 3 / (2 * T)]}))
    assert np.allclose(V.matrix, -1j * PAULI["x"], atol=1e-10)


def test_zero_fields_weak_coupling_is_identity():
    p = ModelParams(3, J=1e-14)
    V = build_floquet(p, realization(3, {}))
    assert np.allclose(V.matrix, np.eye(8), atol=1e-10)


def test_kick_order_x_then_z_then_y():
    p = ModelParams(2, J=0.9, T=2.1)
    dis = realization(2, {"x": [0.3, -0.5], "y": [0.8, 0.1], "z": [-0.4, 0.6]})
    t = p.T / 3
    from scipy.linalg import expm

    U = {a: expm(-1j * t * kron_hamiltonian(a, p.J, dis.field(a))) for a in "xyz"}
    V = build_floquet(p, dis).matrix
    assert np.allclose(V, U["y"] @ U["z"] @ U["x"], atol=1e-10)
    # the kicks do not commute, so the order is actually being tested
    assert not np.allclose(V, U["x"] @ U["z"] @ U["y"], atol=1e-3)


@given(st.integers(1, 6), st.integers(0, 2**31), st.integers(0, 50))
def test_unitarity(L, seed, index):
    p = ModelParams(L, seed=seed)
    assert build_floquet(p, sample_disorder(p, index)).unitarity_error() <= 1e-10


def test_disorder_is_deterministic_and_bounded():
    p = ModelParams(6, J=-0.7, seed=11)
    a, b = sample_disorder(p, 4), sample_disorder(p, 4)
    for axis in "xyz":
        assert np.array_equal(a.field(axis), b.field(axis))
        assert np.all(np.abs(a.field(axis)) <= 0.7)
    assert not np.array_equal(a.h_x, sample_disorder(p, 5).h_x)
    c = DisorderRealization.from_dict(a.to_dict())
    assert np.array_equal(c.h_z, a.h_z) and c.index == 4


def test_hopping_conserves_magnetization():
    p = ModelParams(4)
    H = build_hamiltonian("z", p, sample_disorder(p))
    Q = sum(site_op(PAULI["z"], l, 4) for l in range(4))
    assert np.allclose(H @ Q, Q @ H, atol=1e-12)


@pytest.mark.parametrize(
    "kwargs", [dict(L=0), dict(L=15), dict(L=3, T=0.0), dict(L=3, J=0.0), dict(L=2.5)]
)
def test_invalid_params(kwargs):
    with pytest.raises(ConfigError):
        ModelParams(**kwargs)


def test_bad_axis_and_nonfinite_spectrum():
    p = ModelParams(2)
    with pytest.raises(ValueError):
        build_hamiltonian("w", p, sample_disorder(p))
    with pytest.raises(FloquetError):
        expm_hermitian(np.full((2, 2), np.nan), 1.0)
