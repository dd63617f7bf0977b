import warnings

import numpy as np
import pytest

from beamimpact import assembly as asm
from beamimpact import simulation as sim
from beamimpact.cms import solve_modes
from beamimpact.scenario import Scenario, load_bundled


@pytest.fixture(scope="session")
def freefree_beam():
    return asm.assemble_beam(60, asm.STEEL, asm.TEST_BEAM, bc="free_free")


@pytest.fixture(scope="session")
def freefree_basis(freefree_beam):
    return solve_modes(freefree_beam)


@pytest.fixture(scope="session")
def clamped_beam():
    return asm.assemble_beam(60, asm.STEEL, asm.TEST_BEAM, bc="clamped_clamped")


@pytest.fixture(scope="session")
def central():
    return load_bundled("freefree_central.cfg")


@pytest.fixture(scope="session")
def eccentric():
    return load_bundled("clamped_eccentric.cfg")


@pytest.fixture(scope="session")
def central_setup(central):
    return sim.build_setup(central)


@pytest.fixture(scope="session")
def central_run(central, central_setup):
    return sim.simulate(central, central_setup)


@pytest.fixture(scope="session")
def central_oracle(central, central_setup):
    return sim.hertz_oracle(central, central_setup)


@pytest.fixture(scope="session")
def eccentric_setup(eccentric):
    return sim.build_setup(eccentric)


@pytest.fixture(scope="session")
def eccentric_run(eccentric, eccentric_setup):
    return sim.simulate(eccentric, eccentric_setup)


@pytest.fixture(scope="session")
def eccentric_oracle(eccentric, eccentric_setup):
    return sim.hertz_oracle(eccentric, eccentric_setup)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
