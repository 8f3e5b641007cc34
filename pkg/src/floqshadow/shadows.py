"""Classical shadows: construction, readout correction, batching, and the store file.

A single-basis shadow on n qubits is

    S = sum_s P(s) (x)_l (3 U_l^dag |s_l><s_l| U_l - I),

with P the (quasi-)probabilities of the bitstrings, marginalized onto the
subsystem first.  Shadows are kept as ``(probabilities, unitaries)`` pairs and
only materialized as dense matrices when a consumer needs them; sums over many
shadows go through a GEMM-based accumulator instead of building each one.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .measurement import OutcomeRecord, unitaries_from_seeds
from .qubits import (
    apply_confusion,
    apply_local,
    check_sites,
    marginal,
    n_qubits,
    partial_transpose as _pt,
    symmetrize_charge as _sym,
)

MAX_SHADOW_SITES = 14
DEFAULT_BATCHES = 20

_PURITY_KERNEL = np.array([[5.0, -4.0], [-4.0, 5.0]])


def local_operators(unitaries: np.ndarray) -> np.ndarray:
    """E[..., l, s] = 3 U_l^dag |s><s| U_l - I, shape (..., n, 2, 2, 2)."""
    E = 3 * np.einsum("...si,...sj->...sij", unitaries.conj(), unitaries)
    return E - np.eye(2)


def build_shadows(probs: np.ndarray, unitaries: np.ndarray) -> np.ndarray:
    """Dense shadows for a stack of bases: probs (m, 2^n), unitaries (m, n, 2, 2) -> (m, 2^n, 2^n)."""
    m, dim = probs.shape
    n = unitaries.shape[1]
    if dim != 2**n:
        raise ValueError(f"{dim} outcome probabilities for {n} qubits")
    E = local_operators(unitaries)
    T = probs.reshape(m, dim, 1, 1).astype(complex)
    for q in range(n):
        rest = T.shape[1] // 2
        I, J = T.shape[2], T.shape[3]
        T = T.reshape(m, 2, rest, I, 1, J, 1)
        e0 = E[:, q, 0].reshape(m, 1, 1, 2, 1, 2)
        e1 = E[:, q, 1].reshape(m, 1, 1, 2, 1, 2)
        T = (T[:, 0] * e0 + T[:, 1] * e1).reshape(m, rest, 2 * I, 2 * J)
    return T.reshape(m, dim, dim)


def _kron_operators(E: np.ndarray) -> np.ndarray:
    """F[m, s, :, :] = (x)_l E[m, l, s_l] for every bitstring s of the given qubits."""
    m = E.shape[0]
    F = np.ones((m, 1, 1, 1), dtype=complex)
    for q in range(E.shape[1]):
        e = E[:, q]
        F = F[:, :, None, :, None, :, None] * e[:, None, :, None, :, None, :]
        F = F.reshape(m, F.shape[1] * 2, F.shape[3] * 2, F.shape[5] * 2)
    return F


def accumulate_shadows(probs: np.ndarray, unitaries: np.ndarray, chunk_bytes: int = 1 << 26) -> np.ndarray:
    """sum_m S_m without materializing each S_m.

    The register splits into a head of h qubits and a tail of g = n - h.  Each
    shadow is sum_{s_head} F[s_head] (x) H[s_head], with F a Kronecker product
    of head operators and H a tail shadow built from the conditional
    probabilities; summing over (m, s_head) is then one matrix product.
    """
    m, dim = probs.shape
    n = unitaries.shape[1]
    if n <= 2:
        return build_shadows(probs, unitaries).sum(axis=0)
    h = n // 2
    g = n - h
    per_basis = 16 * (2**h) * (4**h + 4**g)
    step = max(1, chunk_bytes // per_basis)
    out = np.zeros((4**h, 4**g), dtype=complex)
    for lo in range(0, m, step):
        P = probs[lo : lo + step]
        U = unitaries[lo : lo + step]
        k = P.shape[0]
        F = _kron_operators(local_operators(U[:, :h]))
        tail = np.repeat(U[:, h:], 2**h, axis=0)
        H = build_shadows(P.reshape(k * 2**h, 2**g), tail)
        out += F.reshape(k * 2**h, 4**h).T @ H.reshape(k * 2**h, 4**g)
    return out.reshape(2**h, 2**h, 2**g, 2**g).transpose(0, 2, 1, 3).reshape(dim, dim)


def _quadratic_form(pa: np.ndarray, kernels: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """sum_{s,t} pa(s) prod_l K_l[s_l, t_l] pb(t), per leading index."""
    if kernels.shape[-3] == 0:
        return (pa * pb).sum(axis=-1)
    return np.einsum("...s,...s->...", pa, apply_local(pb, kernels))


def shadow_purities(probs: np.ndarray) -> np.ndarray:
    """Tr[S_m^2] for every shadow.  Tr[E_s E_t] is 5 or -4, independent of the basis."""
    n = n_qubits(probs.shape[-1])
    K = np.broadcast_to(_PURITY_KERNEL, (n, 2, 2))
    return _quadratic_form(probs, K, probs).real


def symmetrized_purities(probs: np.ndarray, unitaries: np.ndarray) -> np.ndarray:
    """Tr[Q(S_m)^2] for every shadow, Q the charge-sector projection.

    Uses sum_{w(i)=w(j)} |S_ij|^2 = (n+1)^-1 sum_k Tr[S Z_k S Z_k^dag] with
    Z_k = (x)_l diag(1, w^k), w = exp(2 pi i/(n+1)), which factorizes over qubits.
    """
    n = unitaries.shape[-3]
    if n == 0:
        return shadow_purities(probs)
    E = local_operators(unitaries)
    total = np.zeros(probs.shape[0])
    for k in range(n + 1):
        z = np.array([1.0, np.exp(2j * np.pi * k / (n + 1))])
        K = np.einsum("...sij,j,...tji,i->...st", E, z, E, z.conj())
        total += _quadratic_form(probs.astype(complex), K, probs).real
    return total / (n + 1)


def cross_traces(pa: np.ndarray, ua: np.ndarray, pb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    """Tr[S_a^(m) S_b^(m)] for paired shadows of two states on the same sites."""
    K = np.einsum("...sij,...tji->...st", local_operators(ua), local_operators(ub))
    return _quadratic_form(pa.astype(complex), K, pb).real


# ---------------------------------------------------------------------------
# record-level API


@dataclass(frozen=True)
class ShadowRecord:
    basis_seed: int
    outcome: OutcomeRecord
    state_id: int = 0
    m: int = 0

    @property
    def L(self) -> int:
        return self.outcome.L

    def unitaries(self) -> np.ndarray:
        return unitaries_from_seeds([self.basis_seed], self.L)[0]


@dataclass(frozen=True)
class SubsystemShadow:
    matrix: np.ndarray
    sites: tuple[int, ...]
    m: int = 0

    def partial_transpose(self, sites_B: Sequence[int]) -> np.ndarray:
        return partial_transpose(self, sites_B)


@dataclass(frozen=True)
class BatchShadow:
    matrix: np.ndarray
    index: int
    n_batches: int
    sites: tuple[int, ...] = ()


def build_shadow(record: ShadowRecord, sites: Sequence[int]) -> SubsystemShadow:
    sites = check_sites(sites, record.L, MAX_SHADOW_SITES)
    p = marginal(record.outcome.probabilities(), record.L, sites)
    U = record.unitaries()[list(sites)]
    return SubsystemShadow(build_shadows(p[None], U[None])[0], sites, record.m)


def invert_confusion(confusion: np.ndarray) -> np.ndarray:
    """Per-qubit inverses of (L, 2, 2) confusion matrices; singular ones are an error."""
    det = confusion[:, 0, 0] * confusion[:, 1, 1] - confusion[:, 0, 1] * confusion[:, 1, 0]
    if np.any(np.abs(det) < 1e-12):
        bad = np.flatnonzero(np.abs(det) < 1e-12).tolist()
        raise ValueError(f"singular readout confusion on qubits {bad} (e01 + e10 = 1)")
    return np.linalg.inv(confusion)


def correct_readout(record: ShadowRecord, confusion: np.ndarray) -> ShadowRecord:
    """Replace p~ by (x)_l C_l^-1 p~.  Negative quasi-probabilities are kept."""
    inv = invert_confusion(np.asarray(confusion, float))
    q = apply_confusion(record.outcome.probabilities(), inv)
    out = OutcomeRecord(record.L, exact_probs=q, shots=record.outcome.K)
    return ShadowRecord(record.basis_seed, out, record.state_id, record.m)


def _as_array(shadows) -> np.ndarray:
    if isinstance(shadows, np.ndarray):
        return shadows
    return np.stack([getattr(s, "matrix", s) for s in shadows])


def batch(shadows, B: int = DEFAULT_BATCHES) -> list[BatchShadow]:
    """Average consecutive blocks of floor(M/B) shadows; leftovers are dropped."""
    arr = _as_array(shadows)
    M = arr.shape[0]
    if B < 2:
        raise ValueError(f"need at least 2 batches, got B={B}")
    if B > M:
        raise ValueError(f"B={B} batches from only M={M} shadows")
    size = M // B
    sites = getattr(shadows[0], "sites", ()) if not isinstance(shadows, np.ndarray) else ()
    blocks = arr[: B * size].reshape((B, size) + arr.shape[1:]).mean(axis=1)
    return [BatchShadow(blocks[b], b, B, sites) for b in range(B)]


def partial_transpose(shadow, sites_B: Sequence[int], support: Sequence[int] | None = None) -> np.ndarray:
    """Transpose the factors on ``sites_B``.

    ``shadow`` is a SubsystemShadow/BatchShadow (its sites give the support) or
    a bare (..., d, d) array with ``support`` listing its sites (default
    0..n-1).
    """
    mat = getattr(shadow, "matrix", shadow)
    if support is None:
        support = getattr(shadow, "sites", None) or tuple(range(n_qubits(mat.shape[-1])))
    support = tuple(support)
    missing = [s for s in sites_B if s not in support]
    if missing:
        raise ValueError(f"sites {missing} are not in the shadow support {list(support)}")
    return _pt(mat, [support.index(s) for s in sites_B], len(support))


def symmetrize_charge(shadow) -> np.ndarray:
    return _sym(getattr(shadow, "matrix", shadow))


# ---------------------------------------------------------------------------
# vectorized shadow sets


@dataclass
class ShadowSet:
    """All M single-basis shadows of one state restricted to ``sites``.

    Dense quantities are computed lazily and cached.
    """

    probs: np.ndarray  # (M, 2^n)
    unitaries: np.ndarray  # (M, n, 2, 2)
    sites: tuple[int, ...]
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.probs.shape[0] != self.unitaries.shape[0]:
            raise ValueError("probabilities and unitaries disagree on M")
        if self.probs.shape[1] != 2 ** len(self.sites):
            raise ValueError("probability vectors do not match the site count")

    @property
    def M(self) -> int:
        return self.probs.shape[0]

    @property
    def dim(self) -> int:
        return self.probs.shape[1]

    def matrices(self) -> np.ndarray:
        return build_shadows(self.probs, self.unitaries)

    def total(self) -> np.ndarray:
        if "total" not in self._cache:
            self._batch_sums(DEFAULT_BATCHES if self.M >= DEFAULT_BATCHES else None)
        return self._cache["total"]

    def purities(self) -> np.ndarray:
        if "purities" not in self._cache:
            self._cache["purities"] = shadow_purities(self.probs)
        return self._cache["purities"]

    def symmetrized_purities(self) -> np.ndarray:
        if "sym_purities" not in self._cache:
            self._cache["sym_purities"] = symmetrized_purities(self.probs, self.unitaries)
        return self._cache["sym_purities"]

    def _batch_sums(self, B: int | None) -> None:
        total = np.zeros((self.dim, self.dim), dtype=complex)
        if B is None:
            total += accumulate_shadows(self.probs, self.unitaries)
        else:
            size = self.M // B
            sums = np.empty((B, self.dim, self.dim), dtype=complex)
            for b in range(B):
                sl = slice(b * size, (b + 1) * size)
                sums[b] = accumulate_shadows(self.probs[sl], self.unitaries[sl])
            total += sums.sum(axis=0)
            if B * size < self.M:
                total += accumulate_shadows(self.probs[B * size :], self.unitaries[B * size :])
            self._cache[("batches", B)] = sums / size
        self._cache["total"] = total

    def batches(self, B: int = DEFAULT_BATCHES) -> np.ndarray:
        """(B, d, d) batch shadows, each the mean of floor(M/B) consecutive shadows."""
        if B < 2 or B > self.M:
            raise ValueError(f"cannot form B={B} batches from M={self.M} shadows")
        key = ("batches", B)
        if key not in self._cache:
            self._batch_sums(B)
        return self._cache[key]

    def restrict(self, sites: Sequence[int]) -> "ShadowSet":
        """Shadow set on a subset of this set's sites."""
        pos = [self.sites.index(s) for s in sites]
        sub = marginal(self.probs, len(self.sites), pos)
        return ShadowSet(sub, self.unitaries[:, pos], tuple(sites))


# ---------------------------------------------------------------------------
# per-state store and its file format


_MAGIC = b"FQSS"
_VERSION = 1
_HEADER = struct.Struct("<4sHHIIB3xQQ")
_PAIR = np.dtype([("bitstring", "<u4"), ("count", "<u4")])


@dataclass
class ShadowStore:
    """All measurement records of one prepared state.

    Exact mode keeps an (M, 2^L) probability array; count mode keeps one
    sparse (bitstrings, counts) pair per basis.
    """

    L: int
    basis_seeds: np.ndarray  # (M,) uint64
    seed: int = 0
    state_id: int = 0
    probs: np.ndarray | None = None
    counts: list | None = None
    _unitaries: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.basis_seeds = np.asarray(self.basis_seeds, dtype=np.uint64)
        if (self.probs is None) == (self.counts is None):
            raise ValueError("a store holds either exact probabilities or counts")
        n = len(self.probs) if self.probs is not None else len(self.counts)
        if n != len(self.basis_seeds):
            raise ValueError("one outcome per basis seed required")

    @property
    def M(self) -> int:
        return len(self.basis_seeds)

    @property
    def mode(self) -> str:
        return "exact" if self.probs is not None else "counts"

    @property
    def K(self) -> int:
        """Shots per basis, 0 in exact mode."""
        if self.counts is None or not self.counts:
            return 0
        return int(self.counts[0][1].sum())

    def unitaries(self) -> np.ndarray:
        if self._unitaries is None:
            self._unitaries = unitaries_from_seeds(self.basis_seeds, self.L)
        return self._unitaries

    def record(self, m: int) -> ShadowRecord:
        if self.probs is not None:
            out = OutcomeRecord(self.L, exact_probs=self.probs[m])
        else:
            bits, cnt = self.counts[m]
            out = OutcomeRecord(self.L, bitstrings=bits, counts=cnt)
        return ShadowRecord(int(self.basis_seeds[m]), out, self.state_id, m)

    def records(self) -> list[ShadowRecord]:
        return [self.record(m) for m in range(self.M)]

    def probabilities(self, confusion: np.ndarray | None = None) -> np.ndarray:
        """(M, 2^L) outcome probabilities, readout-inverted when ``confusion`` is given."""
        if self.probs is not None:
            P = self.probs
        else:
            P = np.zeros((self.M, 2**self.L))
            for m, (bits, cnt) in enumerate(self.counts):
                P[m, bits] = cnt
            P /= P.sum(axis=1, keepdims=True)
        if confusion is not None:
            P = apply_confusion(P, invert_confusion(np.asarray(confusion, float)))
        return P

    def shadow_set(self, sites: Sequence[int], confusion: np.ndarray | None = None, probs=None) -> ShadowSet:
        sites = check_sites(sites, self.L, MAX_SHADOW_SITES)
        P = self.probabilities(confusion) if probs is None else probs
        return ShadowSet(marginal(P, self.L, sites), self.unitaries()[:, list(sites)], sites)

    def write(self, path) -> None:
        K = self.K
        with open(path, "wb") as fh:
            mode = 0 if self.probs is not None else 1
            fh.write(_HEADER.pack(_MAGIC, _VERSION, self.L, self.M, K, mode, self.seed, self.state_id))
            for m in range(self.M):
                fh.write(struct.pack("<Q", int(self.basis_seeds[m])))
                if mode == 0:
                    fh.write(np.ascontiguousarray(self.probs[m], dtype="<f8").tobytes())
                else:
                    bits, cnt = self.counts[m]
                    pairs = np.empty(len(bits), dtype=_PAIR)
                    pairs["bitstring"] = bits
                    pairs["count"] = cnt
                    fh.write(struct.pack("<I", len(pairs)))
                    fh.write(pairs.tobytes())

    @classmethod
    def read(cls, path) -> "ShadowStore":
        raw = Path(path).read_bytes()
        magic, version, L, M, K, mode, seed, state_id = _HEADER.unpack_from(raw)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a shadow store")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported store version {version}")
        off = _HEADER.size
        seeds = np.empty(M, dtype=np.uint64)
        dim = 2**L
        probs = np.empty((M, dim)) if mode == 0 else None
        counts = [] if mode == 1 else None
        for m in range(M):
            (seeds[m],) = struct.unpack_from("<Q", raw, off)
            off += 8
            if mode == 0:
                probs[m] = np.frombuffer(raw, dtype="<f8", count=dim, offset=off)
                off += 8 * dim
            else:
                (npairs,) = struct.unpack_from("<I", raw, off)
                off += 4
                pairs = np.frombuffer(raw, dtype=_PAIR, count=npairs, offset=off)
                off += pairs.nbytes
                counts.append((pairs["bitstring"].astype(np.int64), pairs["count"].astype(np.int64)))
        return cls(L, seeds, seed, state_id, probs, counts)
