import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pbitnqs import kernels
from pbitnqs.model import DBM, FRBM, ModelParameters, dense_topology

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, name): acceptance criterion")


@pytest.fixture
def record_criterion(request):
    """Store the measured value of an acceptance criterion for the summary."""
    def record(detail):
        _RESULTS.setdefault(request.node.nodeid, {})["detail"] = detail
        print(detail)
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    entry = _RESULTS.setdefault(item.nodeid, {})
    entry["n"], entry["name"] = mark.args
    if rep.failed:
        entry["ok"] = False
    elif rep.when == "call":
        entry.setdefault("ok", True)


def pytest_terminal_summary(terminalreporter):
    rows = sorted((r for r in _RESULTS.values() if "n" in r), key=lambda r: r["n"])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for r in rows:
        status = "PASS" if r.get("ok") else "FAIL"
        detail = r.get("detail", "no measurement recorded")
        terminalreporter.write_line(f"criterion {r['n']:>2} {status}  {r['name']}: {detail}")


# ----- shared helpers ----------------------------------------------------------

BACKENDS = kernels.available_backends()
needs_both_backends = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")


def random_params(topology, rng, scale=1.0):
    return ModelParameters(topology, rng.uniform(-scale, scale, topology.n_params))


@pytest.fixture
def small_frbm():
    rng = np.random.default_rng(3)
    return random_params(dense_topology(FRBM, 4, 4), rng)


@pytest.fixture
def small_dbm():
    rng = np.random.default_rng(4)
    return random_params(dense_topology(DBM, 4, 4, 4), rng)
