import pytest

from synth import build_fixture


@pytest.fixture(scope="session")
def fixture():
    return build_fixture()
