import copy
import json
from importlib import resources

import pytest

from challenge_cascade.cascade import load_context
from challenge_cascade.catalog import default_catalog
from challenge_cascade.simulation import default_setup


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")
    config._criteria = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            n, title = m.args
            config._criteria.setdefault(n, {"title": title, "outcomes": []})


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    config = _CONFIG.get("config")
    if config is None:
        return
    crit = _CONFIG["nodes"].get(report.nodeid)
    if crit is not None:
        config._criteria[crit]["outcomes"].append(report.outcome == "passed")


_CONFIG: dict = {"nodes": {}}


@pytest.hookimpl(tryfirst=True)
def pytest_collection_finish(session):
    _CONFIG["config"] = session.config
    for item in session.items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _CONFIG["nodes"][item.nodeid] = m.args[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(criteria):
        c = criteria[n]
        outs = c["outcomes"]
        status = "PASS" if outs and all(outs) else ("NOT RUN" if not outs else "FAIL")
        terminalreporter.write_line(f"criterion {n}: {status} - {c['title']}")


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def catalog_doc():
    text = resources.files("challenge_cascade").joinpath("data/catalog.json").read_text(encoding="utf-8")
    return json.loads(text)


@pytest.fixture
def doc(catalog_doc):
    return copy.deepcopy(catalog_doc)


@pytest.fixture(scope="session")
def setup():
    return default_setup(0)


@pytest.fixture(scope="session")
def interview():
    return load_context("interview")


@pytest.fixture(scope="session")
def executive_call():
    return load_context("executive-call")
