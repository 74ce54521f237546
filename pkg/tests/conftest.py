import numpy as np
import pytest

from cfxl.config import SystemConfig
from cfxl.scenario import Scenario

LAM = 0.01


@pytest.fixture
def lam():
    return LAM


@pytest.fixture
def tiny_scenario():
    """M=2, K=2, 4x1 AP arrays and 2x1 UE arrays in a 50 m area."""
    cfg = SystemConfig(n_aps=2, n_ues=2, ap_array=(4, 1), ue_array=(2, 1), side_length=50.0)
    return Scenario(cfg, seed=11)


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


ACCEPTANCE = {}


def record_criterion(num, ok, detail):
    ACCEPTANCE[num] = (bool(ok), detail)
    print(f"CRITERION {num}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"CRITERION {num}: {'PASS' if ok else 'FAIL'} {detail}")
