"""Haar-ensemble predictions: Page curve, entanglement asymmetry, and
permutation-cycle sums for moments of reduced and partially transposed states.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

MAX_ORDER = 6


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class PartitionSpec:
    """Tripartition of an L-site chain into A, B (kept) and C (traced out).

    ``placements`` lists concrete (sites_A, sites_B, sites_C) choices with the
    given sizes; moments averaged over them are the partition-averaged values.
    """

    L_A: int
    L_B: int
    L_C: int
    placements: tuple[tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]], ...] = ()

    def __post_init__(self):
        if min(self.L_A, self.L_B, self.L_C) < 0:
            raise ValueError("subsystem sizes must be non-negative")
        if not self.placements:
            object.__setattr__(self, "placements", (_contiguous(self.L_A, self.L_B, self.L_C),))
        for a, b, c in self.placements:
            if (len(a), len(b), len(c)) != (self.L_A, self.L_B, self.L_C):
                raise ValueError(f"placement sizes {len(a), len(b), len(c)} do not match the partition")
            if sorted(a + b + c) != list(range(self.L)):
                raise ValueError("placement is not a disjoint cover of the chain")

    @classmethod
    def contiguous(cls, L_A: int, L_B: int, L_C: int) -> "PartitionSpec":
        return cls(L_A, L_B, L_C)

    @classmethod
    def averaged(cls, L_A: int, L_B: int, L_C: int, N: int) -> "PartitionSpec":
        """The first N placements in which A and B are each a contiguous block."""
        if N < 1:
            raise ValueError("need at least one placement")
        return cls(L_A, L_B, L_C, tuple(itertools.islice(block_placements(L_A, L_B, L_C), N)))

    @property
    def L(self) -> int:
        return self.L_A + self.L_B + self.L_C

    @property
    def L_AB(self) -> int:
        return self.L_A + self.L_B

    @property
    def dims(self) -> tuple[int, int, int]:
        return 2**self.L_A, 2**self.L_B, 2**self.L_C

    @property
    def D(self) -> int:
        return 2**self.L


def _contiguous(L_A, L_B, L_C):
    L = L_A + L_B + L_C
    return (tuple(range(L_A)), tuple(range(L_A, L_A + L_B)), tuple(range(L_A + L_B, L)))


def block_placements(L_A: int, L_B: int, L_C: int):
    """Placements with A and B contiguous blocks, C the rest; the contiguous A|B|C one first."""
    L = L_A + L_B + L_C
    first = _contiguous(L_A, L_B, L_C)
    yield first
    seen = {first}
    for a0 in range(L - L_A + 1):
        A = tuple(range(a0, a0 + L_A))
        for b0 in range(L - L_B + 1):
            B = tuple(range(b0, b0 + L_B))
            if set(A) & set(B):
                continue
            C = tuple(q for q in range(L) if q not in A and q not in B)
            p = (A, B, C)
            if p not in seen:
                seen.add(p)
                yield p


# ---------------------------------------------------------------------------
# permutations


@dataclass(frozen=True)
class Permutation:
    images: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(len(self.images))):
            raise ValueError(f"{self.images} is not a permutation")

    @property
    def k(self) -> int:
        return len(self.images)

    def __matmul__(self, other: "Permutation") -> "Permutation":
        """Composition (self o other)(j) = self(other(j))."""
        return Permutation(tuple(self.images[j] for j in other.images))

    def inverse(self) -> "Permutation":
        inv = [0] * self.k
        for j, i in enumerate(self.images):
            inv[i] = j
        return Permutation(tuple(inv))

    def cycles(self) -> int:
        return cycle_count(self.images)

    @classmethod
    def shift(cls, k: int, step: int = 1) -> "Permutation":
        return cls(tuple((j + step) % k for j in range(k)))


def cycle_count(images) -> int:
    """Number of cycles, fixed points included."""
    seen = [False] * len(images)
    c = 0
    for start in range(len(images)):
        if not seen[start]:
            c += 1
            j = start
            while not seen[j]:
                seen[j] = True
                j = images[j]
    return c


def _compose(a, b):
    return tuple(a[j] for j in b)


@lru_cache(maxsize=None)
def _cycle_table(k: int) -> tuple[tuple[int, int, int], ...]:
    """(c(tau), c(sigma+ o tau), c(sigma- o tau)) for every tau in S_k."""
    plus = tuple((j + 1) % k for j in range(k))
    minus = tuple((j - 1) % k for j in range(k))
    return tuple(
        (cycle_count(t), cycle_count(_compose(plus, t)), cycle_count(_compose(minus, t)))
        for t in itertools.permutations(range(k))
    )


def _check_order(k: int) -> None:
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"moment order must be in 1..{MAX_ORDER}, got {k}")


# ---------------------------------------------------------------------------
# closed forms


def page_renyi2(L: int, L_A: int) -> float:
    """-log E[Tr rho_A^2] = -log((2^(L-L_A) + 2^L_A) / (2^L + 1))."""
    if not 0 <= L_A <= L:
        raise ValueError(f"need 0 <= L_A <= L, got L_A={L_A}, L={L}")
    return -math.log((2.0 ** (L - L_A) + 2.0**L_A) / (2.0**L + 1))


def ea_haar(L: int, L_A: int) -> float:
    """Haar entanglement asymmetry with averages inside the logarithms.

    EA = -log[(1 + 2^-L C(2L_A, L_A)) / (1 + 2^(2L_A - L))], from
    E[Tr rho_A^2] = (d_A + d_B)/(D + 1) and
    E[Tr rho_{A,Q}^2] = (d_B + C(2L_A, L_A)/d_A)/(D + 1).
    """
    if not 0 <= L_A <= L:
        raise ValueError(f"need 0 <= L_A <= L, got L_A={L_A}, L={L}")
    ln2 = math.log(2)
    log_binom = math.lgamma(2 * L_A + 1) - 2 * math.lgamma(L_A + 1)
    num = math.log1p(math.exp(log_binom - L * ln2))
    den = math.log1p(math.exp((2 * L_A - L) * ln2))
    return den - num


def haar_pt_moment(partition: PartitionSpec, k: int) -> float:
    """(d_A d_B d_C)^-k sum_tau d_C^c(tau) d_A^c(sigma+ tau) d_B^c(sigma- tau).

    Leading order in 1/D: at k=2 it gives (d_A d_B + d_C)/D, against the
    exact (d_A d_B + d_C)/(D + 1).
    """
    _check_order(k)
    dA, dB, dC = partition.dims
    total = sum(dC**c0 * dA**cp * dB**cm for c0, cp, cm in _cycle_table(k))
    return float(Fraction(total, (dA * dB * dC) ** k))


def haar_pt_moment_exact(partition: PartitionSpec, k: int) -> float:
    """Exact Haar average of Tr[(rho_AB^Gamma)^k]: the same cycle sum over D(D+1)...(D+k-1)."""
    _check_order(k)
    dA, dB, dC = partition.dims
    total = sum(dC**c0 * dA**cp * dB**cm for c0, cp, cm in _cycle_table(k))
    D = dA * dB * dC
    return float(Fraction(total, math.prod(range(D, D + k))))


def haar_bipartite_moment(d_A: int, d_B: int, k: int) -> float:
    """Exact E[Tr rho_A^k] for Haar pure states on C^d_A (x) C^d_B."""
    _check_order(k)
    D = d_A * d_B
    k_cycle = tuple((j + 1) % k for j in range(k))
    num = 0
    for t in itertools.permutations(range(k)):
        inv = [0] * k
        for j, i in enumerate(t):
            inv[i] = j
        num += d_A ** cycle_count(_compose(k_cycle, inv)) * d_B ** cycle_count(t)
    return float(Fraction(num, math.prod(range(D, D + k))))


def haar_subsystem_moment(L: int, L_A: int, k: int) -> float:
    return haar_bipartite_moment(2**L_A, 2 ** (L - L_A), k)


def haar_r2(partition: PartitionSpec) -> float:
    return haar_pt_moment(partition, 2) * haar_pt_moment(partition, 3) / haar_pt_moment(partition, 4)


def haar_p3_negativity(partition: PartitionSpec) -> float:
    return 0.5 * math.log2(haar_pt_moment(partition, 2) ** 2 / haar_pt_moment(partition, 3))


def haar_r2_exact(partition: PartitionSpec) -> float:
    m = [haar_pt_moment_exact(partition, k) for k in (2, 3, 4)]
    return m[0] * m[1] / m[2]


def haar_p3_negativity_exact(partition: PartitionSpec) -> float:
    return 0.5 * math.log2(haar_pt_moment_exact(partition, 2) ** 2 / haar_pt_moment_exact(partition, 3))


# ---------------------------------------------------------------------------
# phases


TARGETS = {"ME": 1.0, "ES": 1.5, "PPT": 1.0}


@dataclass(frozen=True)
class Phase:
    name: str  # "ME", "ES", "PPT", or "X|Y" on a boundary
    target: float | None  # thermodynamic r2 target, or the finite-size value
    boundary: bool = False


def classify_phase(partition: PartitionSpec, thermodynamic: bool = True) -> Phase:
    """PPT if L_C > L_AB; otherwise ME if A or B outweighs the rest, else ES.

    Equalities are labeled boundaries.  With ``thermodynamic=False`` the
    target is the finite-size Haar value of r2 instead of 1 or 3/2.
    """
    L_A, L_B, L_C = partition.L_A, partition.L_B, partition.L_C
    L_AB = L_A + L_B
    if L_C > L_AB:
        name = "PPT"
    elif L_C == L_AB:
        name = "ES|PPT"
    else:
        excess = max(L_A - (L_B + L_C), L_B - (L_A + L_C))
        name = "ME" if excess > 0 else ("ME|ES" if excess == 0 else "ES")
    boundary = "|" in name
    if not thermodynamic:
        target = haar_r2(partition) if L_AB > 0 else None
    else:
        target = None if boundary else TARGETS[name]
    return Phase(name, target, boundary)


# ---------------------------------------------------------------------------
# sampling


def haar_state(L: int, gen: np.random.Generator | int | None = None, size: int | None = None) -> np.ndarray:
    """Haar-random pure state(s) as normalized complex Gaussian vectors."""
    if not isinstance(gen, np.random.Generator):
        gen = np.random.default_rng(gen)
    shape = (2**L,) if size is None else (size, 2**L)
    z = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)
