import numpy as np
import pytest

_CRITERIA = []


def random_records(rng, n_max=30, n_strata=2, tie_prob=0.5):
    """Small random dataset with censoring and (often) tied times."""
    n = int(rng.integers(8, n_max + 1))
    latent = rng.exponential(10.0, n)
    cens = rng.uniform(2.0, 25.0, n)
    time = np.minimum(latent, cens)
    if rng.random() < tie_prob:
        time = np.ceil(time)
    event = latent <= cens
    arm = rng.integers(0, 2, n)
    arm[:2] = [0, 1]
    stratum = rng.integers(0, n_strata, n)
    stratum[:n_strata] = np.arange(n_strata)
    return [(float(t), bool(e), int(a), int(s)) for t, e, a, s in zip(time, event, arm, stratum)]


@pytest.fixture
def criterion():
    """Record a pass/fail line for an acceptance criterion; printed in the summary."""

    def record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title}"
        if detail:
            line += f" -- {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
