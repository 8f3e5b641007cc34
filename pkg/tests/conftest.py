import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# acceptance clauses: (criterion, clause, passed, detail)
ACCEPTANCE = []


def random_state(L, rng):
    z = rng.standard_normal(2**L) + 1j * rng.standard_normal(2**L)
    return z / np.linalg.norm(z)


def random_density(d, rng, rank=None):
    rank = d if rank is None else rank
    X = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def random_hermitian(M, d, rng):
    A = rng.standard_normal((M, d, d)) + 1j * rng.standard_normal((M, d, d))
    return A + A.conj().transpose(0, 2, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    by = {}
    for crit, clause, ok, detail in ACCEPTANCE:
        by.setdefault(crit, []).append((clause, ok, detail))
    for crit in sorted(by):
        clauses = by[crit]
        ok = all(c[1] for c in clauses)
        parts = "; ".join(f"[{'ok' if c[1] else 'FAILED'}] {c[0]}: {c[2]}" for c in clauses)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {crit}: {parts}")
