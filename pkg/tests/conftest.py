import numpy as np
import pytest

from refprofile.config import load_config
from refprofile.indices import enumerate_tables
from refprofile.profile import NonlinearitySpec, build_leading
from refprofile.spectral import build_operator

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def default_cfg():
    return load_config()


@pytest.fixture(scope="session")
def default_op(default_cfg):
    return build_operator(default_cfg.grid, default_cfg.potential_fn())


@pytest.fixture(scope="session")
def default_tables(default_op):
    return enumerate_tables(default_op.omegas)


@pytest.fixture(scope="session")
def cubic():
    return NonlinearitySpec((1.0,))


@pytest.fixture(scope="session")
def default_lead(default_op, cubic, default_tables):
    return build_leading(default_op, cubic, default_tables)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {msg}")
