"""Exact pure-state engine: Floquet evolution, reductions and density-matrix moments.

Everything here is the ground truth the shadow estimators are checked against.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .floquet import DisorderRealization, FloquetUnitary, ModelParams, build_floquet
from .qubits import check_sites, partial_transpose, symmetrize_charge

MAX_REDUCED_SITES = 14
NORM_TOL = 1e-10


@dataclass(frozen=True)
class QuantumState:
    amplitudes: np.ndarray
    L: int

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.L,):
            raise ValueError(f"expected {2**self.L} amplitudes, got {self.amplitudes.shape}")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1) > NORM_TOL:
            raise ValueError(f"state not normalized: |psi| = {norm!r}")

    @classmethod
    def zero(cls, L: int) -> "QuantumState":
        psi = np.zeros(2**L, dtype=complex)
        psi[0] = 1
        return cls(psi, L)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class DepolarizedState:
    """(1 - eps) |psi><psi| + eps I/D: the global noise model used for mitigation tests."""

    pure: QuantumState
    eps: float

    def __post_init__(self):
        if not 0 <= self.eps <= 1:
            raise ValueError(f"depolarizing strength must be in [0, 1], got {self.eps}")

    @property
    def L(self) -> int:
        return self.pure.L


@dataclass(frozen=True)
class ReducedDensityMatrix:
    matrix: np.ndarray
    sites: tuple[int, ...]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def evolve(V: FloquetUnitary, state: QuantumState, cycles: int) -> QuantumState:
    if cycles < 0:
        raise ValueError(f"cycle count must be >= 0, got {cycles}")
    psi = state.amplitudes
    for _ in range(cycles):
        psi = V.matrix @ psi
    return QuantumState(psi, state.L)


def trajectory(V: FloquetUnitary, L: int, taus: Iterable[int]) -> dict[int, QuantumState]:
    """States V^tau |0...0> for every requested tau, sharing the matrix-vector products."""
    taus = sorted(set(int(t) for t in taus))
    if taus and taus[0] < 0:
        raise ValueError("cycle counts must be >= 0")
    out = {}
    state = QuantumState.zero(L)
    done = 0
    for t in taus:
        state = evolve(V, state, t - done)
        done = t
        out[t] = state
    return out


def prepare_random_state(
    params: ModelParams, dis: DisorderRealization, tau: int, floquet: FloquetUnitary | None = None
) -> QuantumState:
    V = floquet if floquet is not None else build_floquet(params, dis)
    return evolve(V, QuantumState.zero(params.L), tau)


def reduce(state: QuantumState | DepolarizedState, sites: Sequence[int]) -> ReducedDensityMatrix:
    """Partial trace onto ``sites`` (kept in chain order)."""
    L = state.L
    sites = check_sites(sites, L, MAX_REDUCED_SITES)
    pure = state.pure if isinstance(state, DepolarizedState) else state
    rest = [q for q in range(L) if q not in sites]
    t = pure.amplitudes.reshape((2,) * L).transpose(list(sites) + rest)
    X = t.reshape(2 ** len(sites), -1)
    rho = X @ X.conj().T
    if isinstance(state, DepolarizedState):
        rho = apply_depolarizing(rho, state.eps)
    return ReducedDensityMatrix(rho, sites)


def _matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, ReducedDensityMatrix) else np.asarray(rho)


def exact_moment(rho, n: int) -> float:
    """Tr[rho^n] from the Hermitian eigenvalues."""
    if not 1 <= n <= 6:
        raise ValueError(f"moment order must be in 1..6, got {n}")
    w = np.linalg.eigvalsh(_matrix(rho))
    return float(np.sum(w**n))


def exact_moments(rho, orders: Sequence[int]) -> dict[int, float]:
    w = np.linalg.eigvalsh(_matrix(rho))
    return {n: float(np.sum(w**n)) for n in orders}


def apply_depolarizing(rho, eps: float):
    """(1 - eps) rho + eps I/D; returns the same kind it was given."""
    if not 0 <= eps <= 1:
        raise ValueError(f"depolarizing strength must be in [0, 1], got {eps}")
    m = _matrix(rho)
    out = (1 - eps) * m + eps * np.eye(m.shape[0]) / m.shape[0]
    if isinstance(rho, ReducedDensityMatrix):
        return ReducedDensityMatrix(out, rho.sites)
    return out


def pt_moments_exact(state, sites_A: Sequence[int], sites_B: Sequence[int], orders=(2, 3, 4)) -> dict[int, float]:
    """Moments of (I_A x T_B) Tr_C[rho] computed from the dense reduction."""
    ab = check_sites(tuple(sites_A) + tuple(sites_B), state.L)
    rho = reduce(state, ab)
    pos = [ab.index(s) for s in sites_B]
    return exact_moments(partial_transpose(rho.matrix, pos), orders)


def charge_moment_exact(state, sites: Sequence[int], n: int = 2) -> float:
    """Tr[rho_{A,Q}^n] for the charge-symmetrized reduced state."""
    return exact_moment(symmetrize_charge(reduce(state, sites).matrix), n)


def fidelity(a: QuantumState, b: QuantumState) -> float:
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


_MAGIC = b"FQSV"
_HEADER = struct.Struct("<4sHH")


def dump_amplitudes(state: QuantumState, path) -> None:
    """Binary dump: magic 'FQSV', uint16 version, uint16 L, then 2^L little-endian
    complex doubles (real, imag interleaved)."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, state.L))
        fh.write(np.ascontiguousarray(state.amplitudes, dtype="<c16").tobytes())


def load_amplitudes(path) -> QuantumState:
    raw = Path(path).read_bytes()
    magic, version, L = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a version-1 amplitude dump")
    psi = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    return QuantumState(psi.astype(complex), L)
