import pytest

from krylovmetric import PrecisionContext


@pytest.fixture(scope="session")
def ctx():
    return PrecisionContext()


@pytest.fixture(scope="session")
def ctx_double():
    return PrecisionContext(bits=384)
