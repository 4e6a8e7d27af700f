import numpy as np
import pytest

from mea_sim.geometry import Hotspot, Point2D, UePopulation, build_layout
from mea_sim.network import Scene, macro_transmitters
from mea_sim.propagation import thermal_noise_dbm


def make_scene(isd=500.0, scbs=(150.0, 80.0), centre=(190.0, 80.0), ues=None,
               n_hot=10, seed=0, macros=True):
    """Small hand-placed scene; UEs default to a ring of hotspot users."""
    layout = build_layout(isd)
    hotspot = Hotspot(Point2D(*centre), 10.0)
    if ues is None:
        rng = np.random.default_rng(seed)
        r = 10.0 * np.sqrt(rng.random(n_hot))
        a = rng.random(n_hot) * 2 * np.pi
        ues = np.column_stack((centre[0] + r * np.cos(a), centre[1] + r * np.sin(a)))
    ues = np.atleast_2d(np.asarray(ues, dtype=float))
    pop = UePopulation(ues, np.ones(len(ues), dtype=bool))
    return Scene(layout=layout, sector=0,
                 macros=macro_transmitters(layout) if macros else (),
                 scbs_position=Point2D(*scbs), hotspot=hotspot, ues=pop,
                 noise_dbm=thermal_noise_dbm(10e6, 9.0), n_ues=len(ues),
                 hotspot_fraction=1.0)


@pytest.fixture
def scene():
    return make_scene()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
