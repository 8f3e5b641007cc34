"""End-to-end experiments: prepare random states, measure, estimate, mitigate.

Every function returns a list of flat records (dicts) so that tables can be
written as JSON lines and CSV without further massaging.  Work over states
runs on a thread pool whose size comes from FLOQSHADOW_THREADS (default 1);
results are always reduced in state order, so output does not depend on it.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import rng as _rng
from .config import RunConfig, RunManifest, build_id, sha256
from .errors import ConfigError
from .estimators import (
    average_partitions,
    ensemble_asymmetry,
    ensemble_entropy,
    p3_negativity,
    pt_moments,
    purity,
    r2_ratio,
)
from .floquet import DisorderRealization, build_floquet, sample_disorder
from .haar import (
    PartitionSpec,
    classify_phase,
    ea_haar,
    haar_p3_negativity,
    haar_p3_negativity_exact,
    haar_r2,
    haar_r2_exact,
    haar_subsystem_moment,
    page_renyi2,
)
from .measurement import ReadoutModel, calibrate_readout, noisy_probabilities, sample_counts, unitaries_from_seeds
from .mitigation import fit_epsilon, mitigate, mitigate_purity, response_matrix, split_halves
from .shadows import ShadowStore
from .statevector import (
    DepolarizedState,
    QuantumState,
    charge_moment_exact,
    exact_moment,
    exact_moments,
    pt_moments_exact,
    reduce,
    trajectory,
)

THREADS_ENV = "FLOQSHADOW_THREADS"


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def pmap(fn, items: Iterable) -> list:
    items = list(items)
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# preparation and measurement


@dataclass(frozen=True)
class PreparedState:
    state_id: int
    tau: int
    disorder: DisorderRealization
    state: QuantumState


def prepare_states(cfg: RunConfig, taus: Sequence[int] | None = None) -> dict[int, list[PreparedState]]:
    """Realization r evolved for every tau in ``taus`` (default: just cfg.tau)."""
    taus = sorted(set(taus if taus is not None else [cfg.tau]))
    params = cfg.model

    def one(r):
        dis = sample_disorder(params, r)
        states = trajectory(build_floquet(params, dis), cfg.L, taus)
        return {t: PreparedState(r, t, dis, states[t]) for t in taus}

    per_state = pmap(one, range(cfg.R))
    return {t: [ps[t] for ps in per_state] for t in taus}


def basis_seeds(cfg: RunConfig, state_id: int, tau: int) -> np.ndarray:
    return np.array(
        [_rng.derive_seed64(cfg.seed, _rng.BASIS, state_id, tau, m) for m in range(cfg.M)], dtype=np.uint64
    )


def readout_model(cfg: RunConfig) -> ReadoutModel | None:
    return ReadoutModel.uniform(cfg.L, cfg.e01, cfg.e10) if cfg.has_readout_error else None


def measure_state(cfg: RunConfig, ps: PreparedState) -> ShadowStore:
    """M random local bases, readout confusion, and exact probabilities or K shots each."""
    seeds = basis_seeds(cfg, ps.state_id, ps.tau)
    U = unitaries_from_seeds(seeds, cfg.L)
    state = DepolarizedState(ps.state, cfg.depolarizing) if cfg.depolarizing > 0 else ps.state
    P = noisy_probabilities(state, U, readout_model(cfg))
    if cfg.K is None:
        return ShadowStore(cfg.L, seeds, cfg.seed, ps.state_id, probs=P, _unitaries=U)
    gen = _rng.generator(cfg.seed, _rng.SHOTS, ps.state_id, ps.tau)
    counts = [sample_counts(p, cfg.K, gen) for p in P]
    counts = [(b.astype(np.int64), c.astype(np.int64)) for b, c in counts]
    return ShadowStore(cfg.L, seeds, cfg.seed, ps.state_id, counts=counts, _unitaries=U)


def calibrate(cfg: RunConfig) -> np.ndarray | None:
    """One pooled per-qubit calibration for the whole run (None without readout error)."""
    model = readout_model(cfg)
    if model is None:
        return None
    return calibrate_readout(model, cfg.calibration_shots, _rng.generator(cfg.seed, _rng.CALIBRATION))


@dataclass
class Run:
    config: RunConfig
    states: list[PreparedState]
    stores: list[ShadowStore]
    confusion: np.ndarray | None = None
    eps_fit: dict | None = None

    @property
    def ids(self) -> list[int]:
        return [s.state_id for s in self.states]

    def probabilities(self, i: int, corrected: bool) -> np.ndarray:
        if corrected and self.confusion is not None:
            return self.stores[i].probabilities(self.confusion)
        return self.stores[i].probabilities()

    def variants(self) -> list[str]:
        """'raw' always; 'corrected' when a calibration exists and correction is on."""
        if self.confusion is not None and self.config.readout_correction:
            return ["raw", "corrected"]
        return ["raw"]

    def save(self, out_dir=None) -> Path:
        root = Path(out_dir or self.config.out_dir)
        root.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(self.config.to_dict(), build_id())
        for ps, store in zip(self.states, self.stores):
            name = f"state_{ps.state_id:04d}.fqss"
            store.write(root / name)
            manifest.states.append(
                {
                    "state_id": ps.state_id,
                    "tau": ps.tau,
                    "disorder": ps.disorder.to_dict(),
                    "basis_seeds": [int(s) for s in store.basis_seeds],
                    "file": name,
                }
            )
            manifest.checksums[name] = sha256(root / name)
        manifest.confusion = None if self.confusion is None else self.confusion.tolist()
        manifest.eps_fit = self.eps_fit
        manifest.save(root / "manifest.json")
        return root

    @classmethod
    def load(cls, root) -> "Run":
        root = Path(root)
        manifest = RunManifest.load(root / "manifest.json")
        bad = manifest.verify(root)
        if bad:
            raise ConfigError(f"checksum mismatch for {bad}")
        cfg = manifest.run_config
        params = cfg.model
        states, stores = [], []
        for entry in manifest.states:
            dis = DisorderRealization.from_dict(entry["disorder"])
            psi = trajectory(build_floquet(params, dis), cfg.L, [entry["tau"]])[entry["tau"]]
            states.append(PreparedState(entry["state_id"], entry["tau"], dis, psi))
            stores.append(ShadowStore.read(root / entry["file"]))
        conf = None if manifest.confusion is None else np.asarray(manifest.confusion)
        return cls(cfg, states, stores, conf, manifest.eps_fit)


def generate(cfg: RunConfig, prepared: list[PreparedState] | None = None) -> Run:
    states = prepared if prepared is not None else prepare_states(cfg)[cfg.tau]
    stores = pmap(lambda ps: measure_state(cfg, ps), states)
    return Run(cfg, states, stores, calibrate(cfg))


# ---------------------------------------------------------------------------
# tables


def write_table(rows: list[dict], stem) -> tuple[Path, Path]:
    """``stem``.jsonl plus a CSV mirror with the union of keys as columns."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    jl, cs = stem.with_suffix(".jsonl"), stem.with_suffix(".csv")
    with open(jl, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    cols = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    with open(cs, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
    return jl, cs


def _est_row(est, **keys) -> dict:
    return {**keys, "value": est.value, "sigma": est.sigma, "method": est.method, "n_states": est.n_states}


# ---------------------------------------------------------------------------
# entropy and asymmetry versus subsystem size


def _first_sites(n: int) -> tuple[int, ...]:
    return tuple(range(n))


def subsystem_purities(store: ShadowStore, P: np.ndarray, L_As: Sequence[int]) -> np.ndarray:
    """(len(L_As), 2) array of shadow Tr[rho_A^2] and Tr[rho_{A,Q}^2], A the first L_A sites."""
    out = np.empty((len(L_As), 2))
    for i, L_A in enumerate(L_As):
        ss = store.shadow_set(_first_sites(L_A), probs=P)
        out[i, 0] = purity(ss, with_sigma=False).value
        out[i, 1] = purity(ss, "charge", with_sigma=False).value
    return out


def exact_purities(state: QuantumState, L_As: Sequence[int]) -> np.ndarray:
    out = np.empty((len(L_As), 2))
    for i, L_A in enumerate(L_As):
        rho = reduce(state, _first_sites(L_A)).matrix
        out[i, 0] = exact_moment(rho, 2)
        out[i, 1] = charge_moment_exact(state, _first_sites(L_A), 2)
    return out


def _fit(run: Run, P_of, fit_ids: Sequence[int]):
    """Fit eps from full-system shadow purities of the estimation half."""
    L = run.config.L
    pos = [run.ids.index(s) for s in fit_ids]
    z2 = [purity(run.stores[i].shadow_set(_first_sites(L), probs=P_of(i)), with_sigma=False).value for i in pos]
    return fit_epsilon(z2, 2**L, fit_ids)


def page_curve(cfg: RunConfig, run: Run | None = None, L_As: Sequence[int] | None = None) -> list[dict]:
    """Ensemble Renyi-2 entropy and entanglement asymmetry for every L_A.

    Emits one row per (observable, L_A, variant) with the shadow estimate,
    the exact-state value over the same states, and the Haar prediction.
    Variants: raw, corrected (readout inverted) and, with mitigation on,
    mitigated (the correction half after depolarizing inversion).
    """
    run = run or generate(cfg)
    L = cfg.L
    L_As = list(range(L + 1)) if L_As is None else list(L_As)
    exact = np.stack(pmap(lambda ps: exact_purities(ps.state, L_As), run.states))
    est = {}
    for v in run.variants():
        P_of = lambda i, v=v: run.probabilities(i, v == "corrected")
        est[v] = np.stack(pmap(lambda i: subsystem_purities(run.stores[i], P_of(i), L_As), range(len(run.stores))))

    idx_sets = {v: np.arange(len(run.states)) for v in est}
    if cfg.mitigation:
        base = run.variants()[-1]
        fit_ids, corr_ids = split_halves(run.ids)
        fit = _fit(run, lambda i: run.probabilities(i, base == "corrected"), fit_ids)
        run.eps_fit = {**fit.to_dict(), "response_matrix": response_matrix(2, fit.eps, fit.D).entries.tolist()}
        corr = np.array([run.ids.index(s) for s in corr_ids])
        mit = np.empty((len(corr), len(L_As), 2))
        for j, L_A in enumerate(L_As):
            # both the reduced and the symmetrized state depolarize towards I/d_A
            mit[:, j, :] = mitigate_purity(est[base][corr, j, :], fit, 2**L_A)
        est["mitigated"] = mit
        idx_sets["mitigated"] = corr

    rows = []
    for j, L_A in enumerate(L_As):
        haar = {"renyi2": page_renyi2(L, L_A), "asymmetry": ea_haar(L, L_A)}
        for v, z in est.items():
            idx = idx_sets[v]
            ex = exact[idx, j, :]
            common = dict(L=L, L_A=L_A, variant=v, R_generated=len(run.states), R_used=len(idx))
            if v == "mitigated":
                common["eps"] = run.eps_fit["eps"]
            ent = ensemble_entropy(z[:, j, 0])
            ex_ent = ensemble_entropy(ex[:, 0])
            rows.append(
                _est_row(ent, observable="renyi2", **common, exact=ex_ent.value, exact_sigma=ex_ent.sigma, haar=haar["renyi2"])
            )
            ea = ensemble_asymmetry(z[:, j, 0], z[:, j, 1])
            ex_ea = ensemble_asymmetry(ex[:, 0], ex[:, 1])
            rows.append(
                _est_row(ea, observable="asymmetry", **common, exact=ex_ea.value, exact_sigma=ex_ea.sigma, haar=haar["asymmetry"])
            )
    return rows


# ---------------------------------------------------------------------------
# partial-transpose moments over (L_A, L_B, L_C)


def default_grid(L: int) -> list[tuple[int, int, int]]:
    """Every (L_A, L_B, L_C) with L_AB >= 1."""
    return [(a, ab - a, L - ab) for ab in range(1, L + 1) for a in range(ab + 1)]


def state_pt_moments(
    store: ShadowStore, P: np.ndarray, specs: Sequence[PartitionSpec], orders=(2, 3, 4), B: int = 20
) -> np.ndarray:
    """(len(specs), len(orders)) placement-averaged shadow moments of rho_AB^Gamma (Gamma on B)."""
    cache = {}
    out = np.empty((len(specs), len(orders)))
    for i, spec in enumerate(specs):
        per = []
        for a, b, _ in spec.placements:
            ab = tuple(sorted(a + b))
            if ab not in cache:
                cache[ab] = store.shadow_set(ab, probs=P)
            per.append(pt_moments(cache[ab], b, orders, B))
        avg = average_partitions(per)
        out[i] = [avg[n] for n in orders]
    return out


def exact_state_pt_moments(state: QuantumState, specs: Sequence[PartitionSpec], orders=(2, 3, 4)) -> np.ndarray:
    out = np.empty((len(specs), len(orders)))
    for i, spec in enumerate(specs):
        per = [pt_moments_exact(state, a, b, orders) for a, b, _ in spec.placements]
        out[i] = [np.mean([p[n] for p in per]) for n in orders]
    return out


def phase_diagram(
    cfg: RunConfig,
    points: Sequence[tuple[int, int, int]] | None = None,
    run: Run | None = None,
    orders=(2, 3, 4),
) -> list[dict]:
    """r2 = E[p2]E[p3]/E[p4] and the p3-negativity per partition, jackknifed over states.

    With only orders (2, 3) requested the r2 columns are omitted.
    """
    run = run or generate(cfg)
    L = cfg.L
    points = default_grid(L) if points is None else [tuple(p) for p in points]
    for p in points:
        if sum(p) != L or min(p) < 0 or p[0] + p[1] < 1:
            raise ConfigError(f"partition {p} is not a valid (L_A, L_B, L_C) for L={L}")
    specs = [PartitionSpec.averaged(*p, cfg.n_placements) for p in points]
    orders = tuple(orders)
    exact = np.stack(pmap(lambda ps: exact_state_pt_moments(ps.state, specs, orders), run.states))
    est, idx_sets = {}, {}
    for v in run.variants():
        P_of = lambda i, v=v: run.probabilities(i, v == "corrected")
        est[v] = np.stack(
            pmap(lambda i: state_pt_moments(run.stores[i], P_of(i), specs, orders, cfg.B), range(len(run.stores)))
        )
        idx_sets[v] = np.arange(len(run.states))
    if cfg.mitigation:
        base = run.variants()[-1]
        fit_ids, corr_ids = split_halves(run.ids)
        fit = _fit(run, lambda i: run.probabilities(i, base == "corrected"), fit_ids)
        run.eps_fit = fit.to_dict()
        corr = np.array([run.ids.index(s) for s in corr_ids])
        mit = np.empty((len(corr), len(specs), len(orders)))
        for j, spec in enumerate(specs):
            z = np.concatenate([np.ones((len(corr), 1)), est[base][corr, j, :]], axis=1)
            mit[:, j, :] = mitigate(z, fit, 2**spec.L_AB)[:, 1:]
        est["mitigated"] = mit
        idx_sets["mitigated"] = corr

    k = {n: orders.index(n) for n in orders}
    rows = []
    for j, (spec, p) in enumerate(zip(specs, points)):
        phase = classify_phase(spec)
        common = dict(L=L, L_A=p[0], L_B=p[1], L_C=p[2], phase=phase.name, n_placements=len(spec.placements))
        for v, z in est.items():
            idx = idx_sets[v]
            ex = exact[idx, j, :]
            if 4 in k:
                r = r2_ratio(z[:, j, k[2]], z[:, j, k[3]], z[:, j, k[4]])
                rx = r2_ratio(ex[:, k[2]], ex[:, k[3]], ex[:, k[4]])
                rows.append(
                    _est_row(
                        r, observable="r2", variant=v, **common, exact=rx.value, exact_sigma=rx.sigma,
                        haar=haar_r2(spec), haar_exact=haar_r2_exact(spec), target=phase.target,
                    )
                )
            e3 = p3_negativity(z[:, j, k[2]], z[:, j, k[3]])
            ex3 = p3_negativity(ex[:, k[2]], ex[:, k[3]])
            rows.append(
                _est_row(
                    e3, observable="p3_negativity", variant=v, **common, exact=ex3.value, exact_sigma=ex3.sigma,
                    haar=haar_p3_negativity(spec), haar_exact=haar_p3_negativity_exact(spec),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# design certification and dynamics


def mean_pairwise_fidelity(states: Sequence[QuantumState]) -> tuple[float, float]:
    """Mean |<psi_i|psi_j>|^2 over pairs i < j, with a leave-one-state-out jackknife sigma."""
    R = len(states)
    psi = np.stack([s.amplitudes for s in states])
    F = np.abs(psi.conj() @ psi.T) ** 2
    iu = np.triu_indices(R, 1)
    mean = float(F[iu].mean())
    if R < 3:
        return mean, float("nan")
    # dropping state r removes its row of R - 1 pairs
    off = F.sum(axis=1) - np.diag(F)
    loo = (F[iu].sum() - off) / ((R - 1) * (R - 2) / 2)
    sigma = float(np.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))
    return mean, sigma


def certify_design(cfg: RunConfig, taus: Sequence[int] | None = None, ks=(2, 3, 4)) -> list[dict]:
    """|E[z_k] - E_Haar[z_k]| per (tau, L_A, k) from exact states, plus mean pairwise fidelities."""
    taus = list(taus if taus is not None else (cfg.taus or range(0, 11)))
    prepared = prepare_states(cfg, taus)
    L = cfg.L
    rows = []
    for t in taus:
        states = [ps.state for ps in prepared[t]]
        moments = np.array(
            [[list(exact_moments(reduce(s, _first_sites(a)), ks).values()) for a in range(L + 1)] for s in states]
        )
        for a in range(L + 1):
            for i, kk in enumerate(ks):
                z = moments[:, a, i]
                h = haar_subsystem_moment(L, a, kk)
                rows.append(
                    dict(
                        observable="design", L=L, tau=t, L_A=a, k=kk, mean=float(z.mean()),
                        sem=float(z.std(ddof=1) / math.sqrt(len(z))) if len(z) > 1 else float("nan"),
                        haar=h, diff=abs(float(z.mean()) - h), n_states=len(z),
                    )
                )
        F, sF = mean_pairwise_fidelity(states)
        rows.append(dict(observable="fidelity", L=L, tau=t, mean=F, sigma=sF, haar=2.0**-L, n_states=len(states)))
    return rows


def dynamics(cfg: RunConfig, taus: Sequence[int] | None = None, L_As: Sequence[int] | None = None) -> list[dict]:
    """Ensemble entropy and asymmetry versus tau, shadows and exact side by side."""
    taus = list(taus if taus is not None else (cfg.taus or range(0, 11)))
    prepared = prepare_states(cfg, taus)
    L_As = list(range(cfg.L + 1)) if L_As is None else list(L_As)
    rows = []
    for t in taus:
        run = generate(cfg.replace(tau=t), prepared[t])
        for r in page_curve(cfg.replace(tau=t), run, L_As):
            rows.append({"tau": t, **r})
    return rows

