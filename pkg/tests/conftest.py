import pytest

from pooltest.instances import builtin_paper_instances, disaggregate
from pooltest.model import DesignConfig, Subject, TestCharacteristics, validate_population


def make_population(risks, prefix="S"):
    return validate_population(Subject(f"{prefix}{k}", p) for k, p in enumerate(risks, start=1))


@pytest.fixture
def fig1_population():
    return make_population([0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08])


@pytest.fixture
def fig1_tc():
    return TestCharacteristics(0.75, 0.75)


@pytest.fixture
def fig1_config():
    return DesignConfig(0.6, 8, 6)


@pytest.fixture(scope="session")
def paper_instances():
    return {spec.name: (spec, disaggregate(spec)) for spec in builtin_paper_instances()}
