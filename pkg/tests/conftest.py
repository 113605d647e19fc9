import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlbi.distributions import CorpusSpec, DiscreteDistribution, generate_synthetic

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_distribution(rng, n, d=2, oid=0, scale=1.0):
    bins = rng.normal(size=(n, d)) * scale
    w = rng.dirichlet(np.ones(n))
    return DiscreteDistribution(oid, bins, w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_corpus():
    spec = CorpusSpec(400, bins=24, clusters=6, layout="scatter", shapes=("round", "elongated"))
    return generate_synthetic(spec, 7)


@pytest.fixture(scope="session")
def small_queries():
    spec = CorpusSpec(12, bins=24, clusters=6, layout="scatter", shapes=("round", "elongated"))
    return generate_synthetic(spec, 8)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        name, ok, detail = results[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number} {name}: {detail}")
