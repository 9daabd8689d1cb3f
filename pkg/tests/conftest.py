import numpy as np
import pytest

from qcimaging import PotentialSpec, SpatialGrid, Units, gaussian_packet, to_momentum


@pytest.fixture(scope="session")
def wide_grid():
    return SpatialGrid.symmetric(80.0, 4096)


@pytest.fixture(scope="session")
def free_phi(wide_grid):
    return to_momentum(gaussian_packet(wide_grid, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


REFERENCE_POTENTIALS = {
    "free": PotentialSpec.free(),
    "linear": PotentialSpec.linear(0.1),
    "harmonic": PotentialSpec.harmonic(1.0),
}
UNITS = Units()


_ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record the verdict of one acceptance criterion; the line is printed in the terminal summary."""

    def record(number, title, ok, detail):
        line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[key])
