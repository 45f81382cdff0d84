import httpx
import pytest

from promptdesk.gateway import Gateway
from promptdesk.runtime import DeterministicRuntime
from promptdesk.seed import FIXTURES_FILENAME, seed_demo
from promptdesk.service import AuthoringService, ServiceConfig
from promptdesk.store import Store, default_store_path


def _no_network(request: httpx.Request) -> httpx.Response:
    raise AssertionError(f"unexpected network call to {request.url}")


@pytest.fixture
def runtime():
    return DeterministicRuntime().as_runtime()


@pytest.fixture
def store(tmp_path, runtime):
    s = Store(default_store_path(tmp_path / "data"), clock=runtime.clock)
    yield s
    s.close()


@pytest.fixture
def gateway():
    # Any remote call in the scripted-only suite is a bug, not a fallback.
    g = Gateway(transport=httpx.MockTransport(_no_network))
    yield g
    g.close()


@pytest.fixture
def service(store, gateway, runtime):
    return AuthoringService(store, gateway, ServiceConfig(), runtime)


@pytest.fixture
def seeded(tmp_path, service):
    seed_demo(service, tmp_path / "data" / FIXTURES_FILENAME)
    return service
