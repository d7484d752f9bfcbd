import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from stlftc import scenario as scmod, sim  # noqa: E402
from stlftc.dynamics import integrator  # noqa: E402
from stlftc.formula import FlatFragment  # noqa: E402
from stlftc.sets import GridMask, InputGrid, Space  # noqa: E402

WALK = Space([[-5.5, 5.5]], "grid", resolution=1.0)
WALK_DYN = integrator(1)
WALK_INPUTS = InputGrid.box([-1], [1], 3)


def walk_region(states):
    L = WALK.lattice
    return GridMask(L, np.array([round(c) in states for c in L.centers[:, 0]]))


def walk_states(region):
    return {int(round(c)) for c in region.lattice.centers[region.mask.ravel(), 0]}


def walk_fragments(plain):
    return [FlatFragment(i, op, a, b, walk_region(h1), walk_region(h2))
            for i, (op, a, b, h1, h2) in enumerate(plain)]


@pytest.fixture(scope="session")
def integrator_problem():
    return sim.prepare(scmod.bundled("integrator"))


@pytest.fixture(scope="session")
def integrator_tree(integrator_problem):
    return integrator_problem.tree("box")


@pytest.fixture(scope="session")
def integrator_run():
    return sim.run(scmod.bundled("integrator"))


@pytest.fixture(scope="session")
def unicycle_run():
    return sim.run(scmod.bundled("unicycle"))


@pytest.fixture(scope="session")
def fault_run():
    return sim.run(scmod.bundled("integrator_fault"))
