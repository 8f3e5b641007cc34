"""Index bookkeeping on qubit registers.

All helpers accept stacked inputs: a leading batch axis (or several) is
carried through untouched.  Positions are 0-based, qubit 0 most significant.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np


def n_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def check_sites(sites: Sequence[int], L: int, cap: int | None = None) -> tuple[int, ...]:
    """Validate a site list; returns it in chain order."""
    s = tuple(int(x) for x in sites)
    if len(set(s)) != len(s):
        raise ValueError(f"repeated sites in {list(s)}")
    if any(x < 0 or x >= L for x in s):
        raise ValueError(f"sites {list(s)} outside [0, {L - 1}]")
    if cap is not None and len(s) > cap:
        raise ValueError(f"{len(s)} sites exceeds the dense cap of {cap}")
    return tuple(sorted(s))


def marginal(probs: np.ndarray, L: int, sites: Sequence[int]) -> np.ndarray:
    """Sum a (..., 2^L) probability vector over the qubits outside ``sites``."""
    sites = tuple(sites)
    lead = probs.shape[:-1]
    if len(sites) == L and sites == tuple(range(L)):
        return probs
    t = probs.reshape(lead + (2,) * L)
    off = len(lead)
    drop = tuple(off + q for q in range(L) if q not in sites)
    out = t.sum(axis=drop) if drop else t
    return out.reshape(lead + (2 ** len(sites),))


def apply_local(vecs: np.ndarray, ops: np.ndarray) -> np.ndarray:
    """Apply one 2x2 operator per qubit: ``ops`` is (..., n, 2, 2), ``vecs`` (..., 2^n).

    Leading axes of ``ops`` must broadcast against those of ``vecs``.
    """
    n = ops.shape[-3]
    lead = np.broadcast_shapes(vecs.shape[:-1], ops.shape[:-3])
    t = np.broadcast_to(vecs, lead + vecs.shape[-1:]).reshape(lead + (2,) * n)
    k = len(lead)
    for q in range(n):
        u = ops[..., q, :, :]
        t = np.moveaxis(t, k + q, -1)
        t = np.einsum("...ij,...j->...i", u.reshape(u.shape[:-2] + (1,) * (n - 1) + (2, 2)), t)
        t = np.moveaxis(t, -1, k + q)
    return t.reshape(lead + (2**n,))


def apply_confusion(probs: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """Per-qubit linear maps on a (..., 2^n) probability vector; ``mats`` is (n, 2, 2)."""
    n = mats.shape[0]
    lead = probs.shape[:-1]
    t = probs.reshape(lead + (2,) * n)
    k = len(lead)
    for q in range(n):
        t = np.moveaxis(np.tensordot(mats[q], t, axes=([1], [k + q])), 0, k + q)
    return t.reshape(lead + (2**n,))


def partial_transpose(mat: np.ndarray, positions: Sequence[int], n: int | None = None) -> np.ndarray:
    """Transpose the tensor factors at ``positions`` of a (..., 2^n, 2^n) operator."""
    positions = tuple(positions)
    dim = mat.shape[-1]
    n = n_qubits(dim) if n is None else n
    if any(p < 0 or p >= n for p in positions):
        raise ValueError(f"positions {list(positions)} outside a {n}-qubit register")
    if not positions:
        return mat
    lead = mat.shape[:-2]
    k = len(lead)
    t = mat.reshape(lead + (2,) * (2 * n))
    perm = list(range(k + 2 * n))
    for p in positions:
        perm[k + p], perm[k + n + p] = perm[k + n + p], perm[k + p]
    return t.transpose(perm).reshape(mat.shape)


@lru_cache(maxsize=32)
def hamming_weights(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    w = np.zeros(2**n, dtype=np.int64)
    for q in range(n):
        w += (idx >> q) & 1
    w.setflags(write=False)
    return w


@lru_cache(maxsize=32)
def charge_mask(n: int) -> np.ndarray:
    w = hamming_weights(n)
    m = w[:, None] == w[None, :]
    m.setflags(write=False)
    return m


def symmetrize_charge(mat: np.ndarray) -> np.ndarray:
    """Block-diagonal projection onto fixed-Hamming-weight sectors."""
    return np.where(charge_mask(n_qubits(mat.shape[-1])), mat, 0)
