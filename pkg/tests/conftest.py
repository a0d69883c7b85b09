import pytest

from ptseek import acceptance


@pytest.fixture
def fresh_acceptance_cache():
    acceptance.clear_cache()
    yield
    acceptance.clear_cache()
