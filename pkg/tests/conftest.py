import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from weaknoise import linalg

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_a(rng):
    return linalg.random_hermitian(2, rng)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", None) != "call":
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                lines.append((props["criterion"], outcome, props.get("detail", rep.nodeid)))
    if lines:
        terminalreporter.section("acceptance criteria")
        for n, outcome, detail in sorted(lines):
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if outcome == 'passed' else 'FAIL'}  {detail}")
