import itertools
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from kselect import DiscreteDistribution

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def exact_dists(draw, max_support=4, max_value=20):
    """Rational distributions on small integer supports."""
    size = draw(st.integers(1, max_support))
    values = draw(st.lists(st.integers(0, max_value), min_size=size, max_size=size, unique=True))
    weights = draw(st.lists(st.integers(1, 9), min_size=size, max_size=size))
    total = sum(weights)
    return DiscreteDistribution([(v, Fraction(w, total)) for v, w in zip(values, weights)])


@st.composite
def float_dists(draw, max_support=4):
    size = draw(st.integers(1, max_support))
    values = draw(st.lists(st.floats(0, 100, allow_nan=False), min_size=size, max_size=size))
    weights = draw(st.lists(st.floats(0.05, 1.0), min_size=size, max_size=size))
    total = sum(weights)
    return DiscreteDistribution([(v, w / total) for v, w in zip(values, weights)])


def enumerate_outcomes(variables):
    """Yield (values, probability) over the full joint outcome space."""
    atoms = [d.exact if d.is_exact else list(zip(d.values.tolist(), d.probs.tolist())) for d in variables]
    for combo in itertools.product(*atoms):
        prob = 1
        for _, p in combo:
            prob *= p
        yield [v for v, _ in combo], prob


def enum_max(variables):
    return sum((max(vals) * p for vals, p in enumerate_outcomes(variables)), 0)


def enum_smax(variables):
    return sum((sorted(vals)[-2] * p for vals, p in enumerate_outcomes(variables)), 0)


def coin():
    return DiscreteDistribution([(0, Fraction(1, 2)), (1, Fraction(1, 2))])


def risky():
    return DiscreteDistribution([(0, Fraction(9, 10)), (10, Fraction(1, 10))])


def safe():
    return DiscreteDistribution([(Fraction(11, 10), 1)])


@pytest.fixture
def intro_instance():
    from kselect import Instance
    return Instance([safe() for _ in range(10)] + [risky() for _ in range(10)], 10)


# acceptance criteria append "PASS/FAIL ..." lines here; echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
