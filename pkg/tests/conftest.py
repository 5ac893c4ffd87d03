import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.register_profile("ci", parent=settings.get_profile("default"), max_examples=150)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EPS = np.finfo(np.float64).eps


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fro(x) -> float:
    return float(np.linalg.norm(x, "fro"))


def orth_err(Q) -> float:
    return fro(Q.T @ Q - np.eye(Q.shape[1]))


_ACCEPTANCE: dict = {}


def record_acceptance(key, name: str, ok, detail: str) -> None:
    """ok is True/False, or None when the criterion could not be run here."""
    _ACCEPTANCE[str(key)] = (name, ok, detail)
    print(f"criterion {key}: {'PASS' if ok else 'SKIP' if ok is None else 'FAIL'} {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    order = sorted(_ACCEPTANCE, key=lambda k: (int(k.rstrip("ab")), k))
    for key in order:
        name, ok, detail = _ACCEPTANCE[key]
        status = "PASS" if ok else "SKIP" if ok is None else "FAIL"
        terminalreporter.write_line(f"[{status}] {key:>3} {name}: {detail}")
