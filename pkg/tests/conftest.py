import pytest

import slotpricing as sp
from slotpricing.cli import EXAMPLE_SCENARIO


@pytest.fixture(scope="session")
def table1() -> sp.Scenario:
    return sp.load_scenario(EXAMPLE_SCENARIO)


@pytest.fixture(scope="session")
def table1_solution(table1):
    return sp.solve_horizon(table1)


@pytest.fixture(scope="session")
def table1_enclosings(table1):
    return sp.enumerate_enclosings(table1)
