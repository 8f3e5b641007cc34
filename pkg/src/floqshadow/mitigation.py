"""Global depolarizing-noise mitigation.

Under rho -> (1 - eps) rho + eps I/D the moments mix linearly and
triangularly: z_j -> sum_{k<=j} C(j,k) (1-eps)^k (eps/D)^(j-k) z_k + eps^j/D^(j-1).
The constant is folded into the z_1 column (z_1 = 1), so correction is one
forward substitution.  The same map holds for reduced, charge-symmetrized
and partially transposed states with D replaced by their dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DepolarizingModelError

MAX_ORDER = 4


@dataclass(frozen=True)
class DepolarizingFit:
    eps: float
    D: int
    source_states: tuple[int, ...] = ()
    mean_z2: float | None = None

    def __post_init__(self):
        if not 0 <= self.eps <= 1:
            raise ValueError(f"depolarizing strength must be in [0, 1], got {self.eps}")

    def to_dict(self) -> dict:
        return {"eps": self.eps, "D": self.D, "source_states": list(self.source_states), "mean_z2": self.mean_z2}


@dataclass(frozen=True)
class ResponseMatrix:
    order: int
    eps: float
    dim: int
    entries: np.ndarray  # (order, order) lower triangular; row j-1 gives z_j

    def apply(self, z) -> np.ndarray:
        return np.asarray(z, float) @ self.entries.T


def fit_epsilon(z2_values: Sequence[float], D: int, source_states: Sequence[int] = ()) -> DepolarizingFit:
    """eps = 1 - sqrt((D E[z2] - 1)/(D - 1)), assuming the ideal states are pure."""
    if D < 2:
        raise ValueError(f"need D >= 2, got {D}")
    z2 = float(np.mean(z2_values))
    radicand = (D * z2 - 1) / (D - 1)
    if radicand < 0:
        raise DepolarizingModelError(f"mean purity {z2:.6g} is below 1/D; data inconsistent with depolarizing noise")
    if radicand > 1:
        raise DepolarizingModelError(f"mean purity {z2:.6g} exceeds 1; refusing to clamp eps to 0")
    return DepolarizingFit(1 - math.sqrt(radicand), int(D), tuple(int(s) for s in source_states), z2)


def response_matrix(n: int, eps: float, D: int) -> ResponseMatrix:
    if not 1 <= n <= MAX_ORDER:
        raise ValueError(f"response matrices implemented for orders 1..{MAX_ORDER}, got {n}")
    if not 0 <= eps <= 1:
        raise ValueError(f"depolarizing strength must be in [0, 1], got {eps}")
    M = np.zeros((n, n))
    for j in range(1, n + 1):
        for k in range(1, j + 1):
            M[j - 1, k - 1] = math.comb(j, k) * (1 - eps) ** k * (eps / D) ** (j - k)
        M[j - 1, 0] += eps**j / D ** (j - 1)
    return ResponseMatrix(n, eps, int(D), M)


def mitigate(
    moments,
    fit: DepolarizingFit,
    dim: int | None = None,
    state_ids: Sequence[int] | None = None,
) -> np.ndarray:
    """Solve M_n z = z_noisy by forward substitution.

    ``moments`` is (..., n) holding z_1 = 1, z_2, ..., z_n.  ``dim`` is the
    dimension of the operator the moments belong to (d_A for a subsystem,
    d_AB for a partial transpose); it defaults to the fit's D.  Passing
    ``state_ids`` enforces that none of them were used to fit eps.
    """
    if state_ids is not None:
        leaked = sorted(set(int(s) for s in state_ids) & set(fit.source_states))
        if leaked:
            raise ValueError(f"states {leaked} were used to fit eps and cannot be corrected with it")
    if fit.eps >= 1:
        raise DepolarizingModelError("eps = 1: the response matrix is singular")
    z = np.asarray(moments, float)
    if np.any(np.abs(z[..., 0] - 1) > 1e-8):
        raise ValueError("first moment must be 1")
    R = response_matrix(z.shape[-1], fit.eps, fit.D if dim is None else dim).entries
    out = np.empty_like(z)
    for j in range(z.shape[-1]):
        out[..., j] = (z[..., j] - out[..., :j] @ R[j, :j]) / R[j, j]
    return out


def split_halves(state_ids: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """First ceil(R/2) states fit eps, the rest are corrected."""
    ids = tuple(int(s) for s in state_ids)
    if len(ids) < 2:
        raise ValueError("mitigation needs at least 2 states to split")
    h = (len(ids) + 1) // 2
    return ids[:h], ids[h:]


def mitigate_purity(z2, fit: DepolarizingFit, dim: int) -> np.ndarray:
    """Corrected Tr[rho^2] for one or many noisy purities."""
    z2 = np.asarray(z2, float)
    return mitigate(np.stack([np.ones_like(z2), z2], axis=-1), fit, dim)[..., 1]
