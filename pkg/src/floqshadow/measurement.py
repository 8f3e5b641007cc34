"""Randomized single-qubit measurements with per-qubit readout confusion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .qubits import apply_confusion, apply_local
from .statevector import DepolarizedState, QuantumState


def sample_cue2(gen: np.random.Generator | int | None = None, size: int | tuple | None = None) -> np.ndarray:
    """Haar-random U(2) element(s): QR of a complex Ginibre matrix with the R-diagonal phase fixed.

    ``size=None`` returns one 2x2 matrix, otherwise a (*size, 2, 2) stack.
    """
    if not isinstance(gen, np.random.Generator):
        gen = np.random.default_rng(gen)
    lead = (1,) if size is None else tuple(np.atleast_1d(size))
    shape = lead + (2, 2)
    z = (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * (d / np.abs(d))[..., None, :]
    return q[0] if size is None else q


@dataclass(frozen=True)
class LocalBasis:
    unitaries: np.ndarray  # (L, 2, 2)
    basis_seed: int

    @classmethod
    def from_seed(cls, basis_seed: int, L: int) -> "LocalBasis":
        return cls(sample_cue2(_rng.from_seed64(basis_seed), size=L), int(basis_seed))

    @classmethod
    def identity(cls, L: int) -> "LocalBasis":
        return cls(np.broadcast_to(np.eye(2, dtype=complex), (L, 2, 2)).copy(), 0)

    @property
    def L(self) -> int:
        return self.unitaries.shape[0]


def unitaries_from_seeds(seeds, L: int) -> np.ndarray:
    """(M, L, 2, 2) stack of basis rotations regenerated from their 64-bit seeds."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    out = np.empty((len(seeds), L, 2, 2), dtype=complex)
    for m, s in enumerate(seeds):
        out[m] = sample_cue2(_rng.from_seed64(int(s)), size=L)
    return out


@dataclass(frozen=True)
class ReadoutModel:
    e01: np.ndarray  # P(read 1 | prepared 0), per qubit
    e10: np.ndarray  # P(read 0 | prepared 1), per qubit

    def __post_init__(self):
        object.__setattr__(self, "e01", np.asarray(self.e01, float))
        object.__setattr__(self, "e10", np.asarray(self.e10, float))
        if self.e01.shape != self.e10.shape or self.e01.ndim != 1:
            raise ValueError("e01 and e10 must be equal-length vectors")
        for e in (self.e01, self.e10):
            if np.any(e < 0) or np.any(e >= 0.5):
                raise ValueError("readout error rates must lie in [0, 0.5)")

    @classmethod
    def uniform(cls, L: int, e01: float = 0.0, e10: float = 0.0) -> "ReadoutModel":
        return cls(np.full(L, e01), np.full(L, e10))

    @classmethod
    def ideal(cls, L: int) -> "ReadoutModel":
        return cls.uniform(L)

    @property
    def L(self) -> int:
        return len(self.e01)

    @property
    def is_ideal(self) -> bool:
        return not (self.e01.any() or self.e10.any())

    def confusion(self) -> np.ndarray:
        """Column-stochastic C_l = [[1-e01, e10], [e01, 1-e10]], shape (L, 2, 2)."""
        C = np.empty((self.L, 2, 2))
        C[:, 0, 0] = 1 - self.e01
        C[:, 1, 0] = self.e01
        C[:, 0, 1] = self.e10
        C[:, 1, 1] = 1 - self.e10
        return C


@dataclass(frozen=True)
class OutcomeRecord:
    """Either shot counts (sparse bitstrings + counts) or an exact probability vector.

    After readout inversion the vector holds quasi-probabilities and may have
    negative entries.
    """

    L: int
    bitstrings: np.ndarray | None = None
    counts: np.ndarray | None = None
    exact_probs: np.ndarray | None = None
    shots: int | None = None  # K carried over when counts were turned into quasi-probabilities

    def __post_init__(self):
        if (self.counts is None) == (self.exact_probs is None):
            raise ValueError("an outcome record holds either counts or exact probabilities")
        if self.counts is not None and np.any(self.counts < 0):
            raise ValueError("negative shot counts")

    @property
    def K(self) -> int | None:
        return self.shots if self.counts is None else int(self.counts.sum())

    @property
    def is_exact(self) -> bool:
        return self.exact_probs is not None

    def probabilities(self) -> np.ndarray:
        if self.exact_probs is not None:
            return self.exact_probs
        p = np.zeros(2**self.L)
        np.add.at(p, self.bitstrings, self.counts)
        return p / self.counts.sum()

    def count_map(self) -> dict[str, int]:
        if self.counts is None:
            raise ValueError("exact-mode record has no counts")
        return {format(int(b), f"0{self.L}b"): int(c) for b, c in zip(self.bitstrings, self.counts)}


def rotated_probabilities(state: QuantumState | DepolarizedState, unitaries: np.ndarray) -> np.ndarray:
    """p(s) = <s| U rho U^dag |s> for U = (x)_l U_l.

    ``unitaries`` may be (L, 2, 2) for one basis or (M, L, 2, 2) for many;
    the result is (2^L,) or (M, 2^L) accordingly.
    """
    pure = state.pure if isinstance(state, DepolarizedState) else state
    p = np.abs(apply_local(pure.amplitudes, unitaries)) ** 2
    if isinstance(state, DepolarizedState):
        p = (1 - state.eps) * p + state.eps / p.shape[-1]
    return p


def noisy_probabilities(state, unitaries: np.ndarray, readout: ReadoutModel | None = None) -> np.ndarray:
    p = rotated_probabilities(state, unitaries)
    if readout is not None and not readout.is_ideal:
        p = apply_confusion(p, readout.confusion())
    return p


def sample_counts(probs: np.ndarray, K: int, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """K multinomial shots; returns the sparse (bitstrings, counts) pair."""
    if K < 1:
        raise ValueError(f"sampled mode needs K >= 1 shots, got {K}")
    p = np.clip(probs, 0, None)
    c = gen.multinomial(K, p / p.sum())
    nz = np.flatnonzero(c)
    return nz.astype(np.uint32), c[nz].astype(np.uint32)


def measure(
    state: QuantumState | DepolarizedState,
    basis: LocalBasis,
    K: int | None = None,
    readout: ReadoutModel | None = None,
    mode: str = "exact",
    gen: np.random.Generator | None = None,
) -> OutcomeRecord:
    """Rotate by the local basis, apply readout confusion, and return p~ or K shots from it.

    Sampling shots from the confused distribution is distributed identically
    to sampling noiseless shots and flipping each bit independently.
    """
    if mode not in ("exact", "sampled"):
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    p = noisy_probabilities(state, basis.unitaries, readout)
    if mode == "exact":
        return OutcomeRecord(state.L, exact_probs=p)
    if K is None or K < 1:
        raise ValueError("sampled mode needs K >= 1 shots")
    gen = gen if gen is not None else np.random.default_rng()
    bits, counts = sample_counts(p, K, gen)
    return OutcomeRecord(state.L, bitstrings=bits, counts=counts)


def calibrate_readout(
    readout: ReadoutModel, shots: int | None = None, gen: np.random.Generator | None = None
) -> np.ndarray:
    """Prepare |0> and |1> on every qubit and estimate the per-qubit confusion matrices.

    ``shots=None`` is the infinite-shot limit and returns the true matrices.
    """
    if shots is None:
        return readout.confusion()
    if shots < 1:
        raise ValueError(f"calibration needs shots >= 1, got {shots}")
    gen = gen if gen is not None else np.random.default_rng()
    ones_given_0 = gen.binomial(shots, readout.e01)
    zeros_given_1 = gen.binomial(shots, readout.e10)
    return ReadoutModel(ones_given_0 / shots, zeros_given_1 / shots).confusion()
