import numpy as np
import pytest

from fractalhp import geometry, mesh


@pytest.fixture(scope="session")
def snow():
    return geometry.Snowflake(1.0)


@pytest.fixture(scope="session")
def mesh0():
    return mesh.snowflake_self_similar_mesh(0)


@pytest.fixture(scope="session")
def mesh1():
    return mesh.snowflake_self_similar_mesh(1)


@pytest.fixture(scope="session")
def mesh2():
    return mesh.snowflake_self_similar_mesh(2)


@pytest.fixture(scope="session")
def hybrid0():
    return mesh.hybrid_mesh()


@pytest.fixture(scope="session")
def unit_square_mesh():
    sq = geometry.Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))
    return mesh.Mesh((mesh.make_element(0, sq),), sq, "custom", 0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance():
    """Recorder for acceptance results: acceptance(n, ok, detail)."""

    def record(n, ok, detail):
        _ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
