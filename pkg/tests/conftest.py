import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    b = rng.standard_normal((n, rank))
    return scale * (b @ b.T) / max(rank, 1)


def gershgorin_kernel(rng, n, scale=1.0):
    """Asymmetric nonnegative matrix lifted to row diagonal dominance (P0)."""
    off = rng.uniform(0.0, 1.0, size=(n, n))
    np.fill_diagonal(off, 0.0)
    radii = off.sum(axis=1)
    np.fill_diagonal(off, radii.max(initial=0.0) + rng.uniform(0.0, 0.5))
    return scale * off


def tv_distance(draws: np.ndarray, probs: dict) -> float:
    n = draws.shape[1]
    codes = draws @ (1 << np.arange(n))
    counts = np.bincount(codes, minlength=1 << n) / len(draws)
    tv = 0.0
    for y, p in probs.items():
        code = sum(1 << i for i in y)
        tv += abs(counts[code] - p)
    return 0.5 * tv


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
