import sys
import warnings

import pytest
from hypothesis import settings

from risfa.scenario import default_scenario, load_scenario

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")

SMALL = """
[system]
n_tx = 6
n_users = 2
ris_rows = 2
ris_cols = 2
[users]
theta_deg = 70, 115
phi_deg = 0, 0
range_m = 10, 10
[ris]
theta_deg = 20
phi_deg = 0
range_m = 5
[solver]
max_bcd_iter = 4
max_mm_iter = 10
max_fp_iter = 8
"""


@pytest.fixture(autouse=True)
def _quiet_tfa_flags():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=UserWarning)
        yield


@pytest.fixture(scope="session")
def scn():
    return default_scenario()


@pytest.fixture(scope="session")
def small():
    return load_scenario(SMALL)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    report = getattr(mod, "REPORT", None)
    if report:
        terminalreporter.section("acceptance measurements")
        for k, v in report.items():
            terminalreporter.write_line(f"{k}: {v}")
