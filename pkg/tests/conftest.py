import numpy as np
import pytest

from eegemotion.features import meta_vectors, region_stats
from eegemotion.ingest import SyntheticSpec, generate_synthetic
from eegemotion.labeling import make_labels


@pytest.fixture(scope="session")
def subject():
    """40-trial, 32-channel, 8064-sample synthetic subject with planted labels."""
    return generate_synthetic(SyntheticSpec(rng_seed=0), 40, 32, 8064, 128.0)


@pytest.fixture(scope="session")
def subject_labels(subject):
    return make_labels(subject[1])


@pytest.fixture(scope="session")
def subject_meta(subject):
    return meta_vectors(subject[0])


@pytest.fixture(scope="session")
def subject_regions(subject):
    return region_stats(subject[0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in _ACCEPTANCE.items():
        name = nodeid.split("::")[-1]
        verdict = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[outcome]
        terminalreporter.write_line(f"{verdict:4}  {name}")
