"""Disordered kicked spin chain: the three kick Hamiltonians and the Floquet unitary.

Qubit 0 is the leftmost site and the most significant bit of a basis index,
so dense operators agree with ``np.kron(op_0, op_1, ...)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import ConfigError, FloquetError

AXES = ("x", "y", "z")
MAX_QUBITS = 14


@dataclass(frozen=True)
class ModelParams:
    L: int
    J: float = 1.0
    T: float = 3.0  # units of 1/J
    seed: int = 0
    max_qubits: int = MAX_QUBITS

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError(f"L must be a positive integer, got {self.L}")
        if self.L > self.max_qubits:
            raise ConfigError(f"L={self.L} exceeds the dense cap of {self.max_qubits} qubits")
        if not self.T > 0:
            raise ConfigError(f"Floquet period must be positive, got {self.T}")
        if self.J == 0:
            raise ConfigError("coupling J must be non-zero")

    @property
    def dim(self) -> int:
        return 2**self.L


@dataclass(frozen=True)
class DisorderRealization:
    h_x: np.ndarray
    h_y: np.ndarray
    h_z: np.ndarray
    index: int = 0

    def field(self, axis: str) -> np.ndarray:
        return {"x": self.h_x, "y": self.h_y, "z": self.h_z}[axis]

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "h_x": self.h_x.tolist(),
            "h_y": self.h_y.tolist(),
            "h_z": self.h_z.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DisorderRealization":
        return cls(
            np.asarray(d["h_x"], float),
            np.asarray(d["h_y"], float),
            np.asarray(d["h_z"], float),
            int(d.get("index", 0)),
        )


def sample_disorder(params: ModelParams, index: int = 0) -> DisorderRealization:
    """Local fields uniform on [-|J|, |J|) from the disorder stream ``(seed, index)``."""
    gen = _rng.generator(params.seed, _rng.DISORDER, index)
    J = abs(params.J)
    h = gen.uniform(-J, J, size=(3, params.L))
    return DisorderRealization(h[0], h[1], h[2], index)


def _site_bits(L: int) -> np.ndarray:
    idx = np.arange(2**L)
    return (idx[:, None] >> (L - 1 - np.arange(L))[None, :]) & 1


def build_hamiltonian(axis: str, params: ModelParams, dis: DisorderRealization) -> np.ndarray:
    """H = J sum_l (s+_l s-_{l+1} + h.c.) + sum_l h_l sigma^axis_l as a dense matrix."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    L = params.L
    h = np.asarray(dis.field(axis), float)
    if h.shape != (L,):
        raise ValueError(f"disorder has {h.shape} fields for L={L}")
    dim = 2**L
    idx = np.arange(dim)
    bits = _site_bits(L)
    H = np.zeros((dim, dim), dtype=complex)

    # flip-flop hopping only connects |..01..> and |..10..> on a bond
    for l in range(L - 1):
        differ = bits[:, l] != bits[:, l + 1]
        src = idx[differ]
        mask = (1 << (L - 1 - l)) | (1 << (L - 2 - l))
        H[src ^ mask, src] += params.J

    for l in range(L):
        b = bits[:, l]
        flip = idx ^ (1 << (L - 1 - l))
        if axis == "z":
            H[idx, idx] += h[l] * (1 - 2 * b)
        elif axis == "x":
            H[flip, idx] += h[l]
        else:
            # <1|Y|0> = i, <0|Y|1> = -i
            H[flip, idx] += h[l] * np.where(b == 0, 1j, -1j)
    return H


def expm_hermitian(H: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) from the eigendecomposition of Hermitian H."""
    try:
        w, Q = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise FloquetError(f"eigendecomposition failed for a {H.shape[0]}-dim Hamiltonian: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise FloquetError("eigendecomposition produced non-finite eigenvalues")
    return (Q * np.exp(-1j * w * t)) @ Q.conj().T


@dataclass(frozen=True)
class FloquetUnitary:
    matrix: np.ndarray
    factors: tuple = field(default=(), repr=False)  # (U_x, U_z, U_y) in application order

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def unitarity_error(self) -> float:
        V = self.matrix
        return float(np.abs(V.conj().T @ V - np.eye(V.shape[0])).max())


def build_floquet(params: ModelParams, dis: DisorderRealization, tol: float = 1e-10) -> FloquetUnitary:
    """V = exp(-i H_y T/3) exp(-i H_z T/3) exp(-i H_x T/3)."""
    t = params.T / 3
    Ux, Uz, Uy = (expm_hermitian(build_hamiltonian(a, params, dis), t) for a in ("x", "z", "y"))
    V = FloquetUnitary(Uy @ (Uz @ Ux), (Ux, Uz, Uy))
    err = V.unitarity_error()
    if not err <= tol:
        raise FloquetError(f"Floquet unitary violates unitarity: max|V'V - I| = {err:.3g}")
    return V
