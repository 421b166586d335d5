import numpy as np
import pytest

from staggered_did.panel import AdoptionAssignment, Panel, PotentialOutcomeTable


def random_population(rng, N, T, scale=1.0):
    return PotentialOutcomeTable(scale * rng.standard_normal((N, T, T + 1)))


def random_counts(rng, N, T, min_groups=2, min_size=1):
    """Random date counts with at least ``min_groups`` non-empty dates of size >= min_size."""
    K = T + 1
    while True:
        k = rng.integers(min_groups, K + 1)
        groups = rng.choice(K, size=k, replace=False)
        if N < k * min_size:
            continue
        counts = np.zeros(K, dtype=np.int64)
        counts[groups] = min_size
        extra = rng.multinomial(N - k * min_size, np.ones(k) / k)
        counts[groups] += extra
        # dates 1 and never alone carry no exposure variation
        nz = set(np.flatnonzero(counts))
        if nz == {0, T}:
            continue
        return counts


def random_panel(rng, N, T, counts=None):
    if counts is None:
        counts = random_counts(rng, N, T)
    codes = rng.permutation(np.repeat(np.arange(T + 1), counts))
    return Panel(rng.standard_normal((N, T)), AdoptionAssignment(codes, T))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def two_period_population(rng, N):
    """T=2 population with zero first-period outcomes."""
    Y = np.zeros((N, 2, 3))
    Y[:, 1, :] = rng.standard_normal((N, 3))
    return PotentialOutcomeTable(Y)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
