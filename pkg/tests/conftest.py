import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chaospcs.chaos import ChaoticKey
from chaospcs.pipeline import KeyBundle

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def key():
    return ChaoticKey(0.4, 0.3)


@pytest.fixture
def bundle():
    return KeyBundle.from_values(0.63, 0.33, 0.28, 0.73)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line, then assert on it."""

    def check(number: int, ok: bool, detail: str) -> None:
        _ACCEPTANCE[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_ACCEPTANCE[number])
        assert ok, detail

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
