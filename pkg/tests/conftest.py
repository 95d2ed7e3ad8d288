import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sublab.fixtures import builtin_corpus, get_fixture
from sublab.oneill import ProjectorField

settings.register_profile("ci", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

AFFINE = ("ex4_3", "ex4_4", "ex4_5", "ex4_6", "ex4_7", "trivial_invariant")


@pytest.fixture(scope="session")
def corpus():
    return {fx.name: fx for fx in builtin_corpus()}


def field_for(name, **params):
    fx = get_fixture(name)
    return ProjectorField(fx.map, dict(fx.params, **params))


def radial_point(r, seed=0):
    """A point at distance r from the origin, in a generic direction."""
    d = np.random.default_rng(seed).normal(size=4)
    return r * d / np.linalg.norm(d)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.report_lines():
            terminalreporter.write_line(line)
