"""Shadow-based estimators with U-statistics, and ensemble-level statistics.

Moments are U-statistics over distinct shadows: the trace of a product of n
shadows with pairwise-distinct basis indices, averaged over all ordered
tuples.  Order 2 uses the Gram identity on the full shadow set; orders 3 and
4 run on batch shadows and are evaluated by inclusion-exclusion over
coincidence patterns, which needs O(B^2) matrix products instead of B^n.

Ensemble observables (entropies, ratios) always take logarithms and ratios
of state-averaged moments; uncertainties come from the leave-one-state-out
jackknife.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NonPositiveMomentError
from .qubits import partial_transpose as _pt
from .qubits import symmetrize_charge as _sym
from .shadows import DEFAULT_BATCHES, ShadowSet, cross_traces


@dataclass(frozen=True)
class MomentEstimate:
    order: int
    value: float
    method: str  # "full-U" or "batch-U"
    sigma: float | None = None


@dataclass(frozen=True)
class Estimate:
    value: float
    sigma: float | None = None
    method: str | None = None  # "sem", "jackknife" or "batch-jackknife"
    n_states: int = 1
    n_bases: int | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.sigma is not None and self.sigma < 0:
            raise ValueError("uncertainty must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def _tr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tr[a b] over the trailing two axes without forming the product."""
    return np.einsum("...ij,...ji->...", a, b)


def _stack(shadows) -> np.ndarray:
    if isinstance(shadows, np.ndarray):
        return shadows
    return np.stack([getattr(s, "matrix", s) for s in shadows])


def u_trace_sum(mats: np.ndarray, n: int) -> complex:
    """sum over ordered n-tuples of pairwise-distinct indices of Tr[S_1 ... S_n], n <= 4."""
    M = mats.shape[0]
    if n < 1 or n > 4:
        raise ValueError(f"U-statistics implemented for orders 1..4, got {n}")
    if M < n:
        raise ValueError(f"order-{n} U-statistic needs at least {n} matrices, got {M}")
    T = mats.sum(axis=0)
    if n == 1:
        return complex(np.trace(T))
    if n == 2:
        return complex(_tr(T, T) - _tr(mats, mats).sum())
    sq = mats @ mats
    Q2 = sq.sum(axis=0)
    cube = _tr(sq, mats).sum()
    if n == 3:
        return complex(_tr(T @ T, T) - 3 * _tr(Q2, T) + 2 * cube)
    T2 = T @ T
    ST = mats @ T
    pairs = 0.0
    for a in range(M - 1):
        P = mats[a] @ mats[a + 1 :]
        pairs += _tr(P, P).sum()
    return complex(
        _tr(T2, T2)
        - 4 * _tr(Q2, T2)
        - 2 * _tr(ST, ST).sum()
        + 2 * _tr(Q2, Q2)
        + 8 * _tr(sq, ST).sum()
        - 5 * _tr(sq, sq).sum()
        + 2 * pairs
    )


def _falling(M: int, n: int) -> int:
    return math.perm(M, n)


def u_moment(shadows, n: int, method: str | None = None) -> MomentEstimate:
    """Unbiased Tr[rho^n] from a list/stack of shadows (or a ShadowSet).

    A ShadowSet uses the Gram fast path for n <= 2 and its B=20 batch shadows
    for n >= 3.
    """
    if isinstance(shadows, ShadowSet):
        if n <= 2:
            return MomentEstimate(n, _set_moment(shadows, n), "full-U")
        mats = shadows.batches(DEFAULT_BATCHES)
        return MomentEstimate(n, u_trace_sum(mats, n).real / _falling(len(mats), n), "batch-U")
    mats = _stack(shadows)
    return MomentEstimate(n, u_trace_sum(mats, n).real / _falling(len(mats), n), method or "full-U")


def _set_moment(ss: ShadowSet, n: int, transform: str | None = None, sites_B=()) -> float:
    M = ss.M
    if n == 1:
        return float(np.trace(ss.total()).real / M)
    T = ss.total()
    if transform == "charge":
        T = _sym(T)
        sq = ss.symmetrized_purities().sum()
    else:
        if transform == "pt":
            T = _pt(T, _positions(ss, sites_B), len(ss.sites))
        sq = ss.purities().sum()
    if M < 2:
        raise ValueError("order-2 U-statistic needs at least 2 shadows")
    return float((_tr(T, T).real - sq) / (M * (M - 1)))


def _positions(ss: ShadowSet, sites_B) -> list[int]:
    missing = [s for s in sites_B if s not in ss.sites]
    if missing:
        raise ValueError(f"sites {missing} are not in the shadow support {list(ss.sites)}")
    return [ss.sites.index(s) for s in sites_B]


def _batch_jackknife_z2(batches: np.ndarray) -> float:
    """Leave-one-batch-out jackknife sigma of the batch-U purity."""
    B = len(batches)
    T = batches.sum(axis=0)
    diag = _tr(batches, batches).real
    cross = _tr(T[None], batches).real  # Tr[T S_b]
    tt = _tr(T, T).real
    # Tr[(T - S_b)^2] - (sum diag - diag_b), over (B-1)(B-2) ordered pairs
    loo = (tt - 2 * cross + diag - (diag.sum() - diag)) / ((B - 1) * (B - 2))
    return _jk_sigma(loo)


def _jk_sigma(samples: np.ndarray) -> float:
    R = len(samples)
    return float(np.sqrt((R - 1) / R * np.sum((samples - samples.mean()) ** 2)))


def _neg_log(value: float, observable: str) -> float:
    if not value > 0:
        raise NonPositiveMomentError(observable, value)
    return -math.log(value)


def purity(
    shadows, transform: str | None = None, B: int = DEFAULT_BATCHES, with_sigma: bool = True
) -> MomentEstimate:
    """Order-2 moment with a batch-jackknife sigma; ``transform='charge'`` symmetrizes first."""
    if isinstance(shadows, ShadowSet):
        value = _set_moment(shadows, 2, transform)
        if not with_sigma:
            return MomentEstimate(2, value, "full-U")
        batches = shadows.batches(B) if shadows.M >= 2 * B else None
    else:
        mats = _stack(shadows)
        if transform == "charge":
            mats = _sym(mats)
        value = u_trace_sum(mats, 2).real / _falling(len(mats), 2)
        M = len(mats)
        batches = mats[: B * (M // B)].reshape((B, M // B) + mats.shape[1:]).mean(axis=1) if M >= 2 * B else None
    sigma = None
    if batches is not None:
        if transform == "charge":
            batches = _sym(batches)
        sigma = _batch_jackknife_z2(batches)
    return MomentEstimate(2, value, "full-U", sigma)


def renyi2_entropy(shadows, B: int = DEFAULT_BATCHES) -> Estimate:
    """-log Tr[rho_A^2] for one state (natural log)."""
    z = purity(shadows, B=B)
    value = _neg_log(z.value, "renyi2_entropy")
    sigma = None if z.sigma is None else z.sigma / z.value
    M = shadows.M if isinstance(shadows, ShadowSet) else len(_stack(shadows))
    return Estimate(value, sigma, "batch-jackknife" if sigma is not None else None, 1, M)


def asymmetry(shadows, B: int = DEFAULT_BATCHES) -> Estimate:
    """S^(2) of the charge-symmetrized state minus S^(2) of the state, from one shadow set."""
    raw = purity(shadows, B=B)
    sym = purity(shadows, "charge", B=B)
    value = _neg_log(sym.value, "asymmetry (symmetrized)") - _neg_log(raw.value, "asymmetry (raw)")
    sigma = None
    if raw.sigma is not None:
        sigma = math.hypot(sym.sigma / sym.value, raw.sigma / raw.value)
    M = shadows.M if isinstance(shadows, ShadowSet) else len(_stack(shadows))
    return Estimate(value, sigma, "batch-jackknife" if sigma is not None else None, 1, M)


def pt_moments(shadows, sites_B: Sequence[int], orders=(2, 3, 4), B: int = DEFAULT_BATCHES) -> dict[int, MomentEstimate]:
    """Moments Tr[(rho^Gamma)^n] of the partial transpose on ``sites_B``.

    ``shadows`` is a ShadowSet on the sites of A u B (order 2 on the full set,
    orders >= 3 on its batch shadows) or a bare stack whose qubits are
    0..n-1, used as-is for every order.
    """
    out = {}
    if isinstance(shadows, ShadowSet):
        pos = _positions(shadows, sites_B)
        high = [n for n in orders if n >= 3]
        if high:
            batches = _pt(shadows.batches(B), pos, len(shadows.sites))
            sums = _u34(batches, max(high))
        for n in orders:
            if n <= 2:
                out[n] = MomentEstimate(n, _set_moment(shadows, n, "pt", sites_B), "full-U")
            else:
                out[n] = MomentEstimate(n, sums[n].real / _falling(B, n), "batch-U")
        return out
    mats = _pt(_stack(shadows), list(sites_B))
    for n in orders:
        out[n] = MomentEstimate(n, u_trace_sum(mats, n).real / _falling(len(mats), n), "full-U")
    return out


def _u34(mats: np.ndarray, top: int) -> dict[int, complex]:
    """Orders 3 (and 4) from one pass that shares the matrix products."""
    if top == 3:
        return {3: u_trace_sum(mats, 3)}
    return {3: u_trace_sum(mats, 3), 4: u_trace_sum(mats, 4)}


def average_partitions(per_partition: Sequence[dict[int, MomentEstimate]]) -> dict[int, float]:
    """Mean of one state's moments over several placements of the same (L_A, L_B, L_C)."""
    orders = per_partition[0].keys()
    return {n: float(np.mean([p[n].value for p in per_partition])) for n in orders}


# ---------------------------------------------------------------------------
# ensemble statistics


def jackknife(values, statistic: Callable[[np.ndarray], float]) -> tuple[float, float]:
    """Leave-one-state-out resampling.

    Returns the mean of the R leave-one-out statistics and
    sigma = sqrt((R-1)/R sum_r (O_r - O)^2).
    """
    values = np.asarray(values, float)
    R = len(values)
    if R < 2:
        raise ValueError(f"jackknife needs at least 2 states, got {R}")
    samples = np.array([statistic(np.delete(values, r, axis=0)) for r in range(R)])
    return float(samples.mean()), _jk_sigma(samples)


def sem(values) -> float:
    values = np.asarray(values, float)
    return float(values.std(ddof=1) / math.sqrt(len(values)))


def _ensemble(values, statistic, n_bases=None, **extra) -> Estimate:
    values = np.asarray(values, float)
    value = statistic(values)
    _, sigma = jackknife(values, statistic)
    return Estimate(value, sigma, "jackknife", len(values), n_bases, extra)


def ensemble_entropy(z2, n_bases=None) -> Estimate:
    """-log E[Tr rho_A^2] over the states, jackknife sigma."""
    z2 = np.asarray(z2, float)
    if not z2.mean() > 0:
        raise NonPositiveMomentError("ensemble purity", float(z2.mean()))
    return _ensemble(z2, lambda v: -math.log(v.mean()), n_bases)


def ensemble_asymmetry(z2, z2_sym, n_bases=None) -> Estimate:
    data = np.column_stack([z2, z2_sym])
    means = data.mean(axis=0)
    if not np.all(means > 0):
        raise NonPositiveMomentError("ensemble asymmetry", float(means.min()))
    return _ensemble(data, lambda v: math.log(v[:, 0].mean()) - math.log(v[:, 1].mean()), n_bases)


def r2_ratio(p2, p3, p4, n_bases=None) -> Estimate:
    """E[p2] E[p3] / E[p4] with a jackknife over states."""
    data = np.column_stack([p2, p3, p4])
    if not data[:, 2].mean() > 0:
        raise NonPositiveMomentError("r2_ratio: E[p4]", float(data[:, 2].mean()))

    def stat(v):
        m = v.mean(axis=0)
        return m[0] * m[1] / m[2]

    return _ensemble(data, stat, n_bases)


def p3_negativity(p2, p3, n_bases=None) -> Estimate:
    """(1/2) log2(E[p2]^2 / E[p3])."""
    data = np.column_stack([p2, p3])
    if not data[:, 1].mean() > 0:
        raise NonPositiveMomentError("p3_negativity: E[p3]", float(data[:, 1].mean()))

    def stat(v):
        m = v.mean(axis=0)
        return 0.5 * math.log2(m[0] ** 2 / m[1])

    return _ensemble(data, stat, n_bases)


def ensemble_mean(values, n_bases=None) -> Estimate:
    """Plain mean with SEM, the convention for per-state observables."""
    values = np.asarray(values, float)
    return Estimate(float(values.mean()), sem(values), "sem", len(values), n_bases)


# ---------------------------------------------------------------------------
# fidelity


def overlap(a, b) -> float:
    """(1/(M(M-1))) sum_{m != m'} Tr[S_a^(m) S_b^(m')]."""
    if isinstance(a, ShadowSet) and isinstance(b, ShadowSet):
        if a.M != b.M or a.sites != b.sites:
            raise ValueError("overlap needs shadow sets with equal M on the same sites")
        diag = cross_traces(a.probs, a.unitaries, b.probs, b.unitaries).sum()
        Ta, Tb, M = a.total(), b.total(), a.M
    else:
        sa, sb = _stack(a), _stack(b)
        if sa.shape != sb.shape:
            raise ValueError("overlap needs equally many shadows of equal dimension")
        diag = _tr(sa, sb).real.sum()
        Ta, Tb, M = sa.sum(axis=0), sb.sum(axis=0), len(sa)
    return float((_tr(Ta, Tb).real - diag) / (M * (M - 1)))


def fidelity(a, b) -> Estimate:
    """Tr[rho_a rho_b] / max(Tr[rho_a^2], Tr[rho_b^2])."""
    pa = purity(a).value
    pb = purity(b).value
    if not (pa > 0 and pb > 0):
        raise NonPositiveMomentError("fidelity purity", min(pa, pb))
    ov = overlap(a, b)
    M = a.M if isinstance(a, ShadowSet) else len(_stack(a))
    return Estimate(ov / max(pa, pb), None, None, 2, M, {"overlap": ov, "purity_a": pa, "purity_b": pb})
