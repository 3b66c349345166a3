import warnings

import pytest

from snldp.density import make_cauchy, make_gaussian
from snldp.montecarlo import AdvisoryWarning

# Filled by the acceptance module; printed once at the end of the session.
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def gauss():
    return make_gaussian()


@pytest.fixture
def cauchy():
    return make_cauchy()


@pytest.fixture(params=["gaussian", "cauchy"])
def builtin(request):
    return make_gaussian() if request.param == "gaussian" else make_cauchy()


@pytest.fixture(autouse=True)
def _quiet_advisories():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdvisoryWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
