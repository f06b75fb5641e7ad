import numpy as np
import pytest


def random_spd(rng, n, low=0.1, high=10.0):
    """Random SPD matrix with eigenvalues in [low, high]."""
    Qm, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return Qm @ np.diag(rng.uniform(low, high, n)) @ Qm.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: call with (label, passed, detail)."""

    def record(label: str, passed: bool, detail: str = "") -> None:
        _CRITERIA.append((label, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
