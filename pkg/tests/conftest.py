import numpy as np
import pytest

from boed_lab import _kernels_py

try:
    from boed_lab import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

BACKENDS = [pytest.param(_kernels_py, id="numpy")]
if _kernels_c is not None:
    BACKENDS.append(pytest.param(_kernels_c, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
