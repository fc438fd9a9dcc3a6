import numpy as np
import pytest

from refspread import ModelParams, Scenario, scenario_reference


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def refs(params):
    return scenario_reference(params, Scenario())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, spread=1.0):
    """Arm configuration near the working region plus arbitrary velocities."""
    q = np.array([1.9, -1.6, -0.3, 0.0]) + spread * rng.uniform(-0.6, 0.6, 4)
    qdot = rng.normal(0.0, 1.0, 4)
    return q, qdot


# -- acceptance reporting ---------------------------------------------------------
# criterion -> list of (sub-check, passed, detail); printed once at the end of the session

ACCEPTANCE: dict[str, list[tuple[str, bool, str]]] = {}


def record(criterion: str, check: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(passed), detail))
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=lambda c: int(c.split()[0])):
        checks = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in checks)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {crit}")
        for name, p, detail in checks:
            tr.write_line(f"        {'ok  ' if p else 'FAIL'} {name}: {detail}")
