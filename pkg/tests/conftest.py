import numpy as np
import pytest

from core.grid import BoundaryTag, build_dof_map, build_rect_mesh
from models.materials import CutoffParams, MaterialSet

CANTILEVER = {"left": "DIRICHLET_D", "right": "NEUMANN_0", "top": "NEUMANN_0", "bottom": "NEUMANN_0"}
CLAMPED = {side: "DIRICHLET_D" for side in ("bottom", "right", "top", "left")}


def interior_phase(n_vertices, n_materials, rng):
    """Nodal simplex vectors bounded away from the faces, where the cut-off is the identity."""
    floor = 0.2 / n_materials
    return floor + (1.0 - n_materials * floor) * rng.dirichlet(np.ones(n_materials), size=n_vertices)


def direction(n_vertices, n_materials, rng, scale=1.0):
    h = rng.standard_normal((n_vertices, n_materials))
    return scale * h / np.abs(h).max()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mats2():
    return MaterialSet(n_materials=2, densities=[1.0], void_density_base=1.0, young=[1.0],
                       poisson=[0.3], void_young_base=1.0, interface_eps=0.1)


@pytest.fixture
def mats3():
    return MaterialSet(n_materials=3, densities=[1.0, 0.5], void_density_base=1.0, young=[1.0, 0.4],
                       poisson=[0.3, 0.25], void_young_base=1.0, interface_eps=0.1)


@pytest.fixture
def cutoff2(mats2):
    return CutoffParams.default_for(mats2)


@pytest.fixture
def cantilever():
    return build_rect_mesh(6, 3, 2.0, 1.0, CANTILEVER)


@pytest.fixture
def cantilever_dofs(cantilever):
    return build_dof_map(cantilever, BoundaryTag.DIRICHLET_D)


@pytest.fixture
def symmetric_square():
    """Clamped unit square on a criss-cross mesh with the symmetry group of the square."""
    return build_rect_mesh(8, 8, 1.0, 1.0, CLAMPED, diagonal="alternating")


@pytest.fixture
def mats_double(mats2):
    """Poisson ratio 0.2 makes the lowest clamped-square mode the translational (doubly degenerate) one."""
    return mats2.model_copy(update={"poisson": [0.2], "void_poisson": 0.2})


@pytest.fixture
def config_dict():
    return {
        "mesh": {"nx": 6, "ny": 3, "lx": 2.0, "ly": 1.0, "sides": dict(CANTILEVER)},
        "materials": {"n_materials": 2, "densities": [1.0], "young": [1.0], "poisson": [0.3],
                      "void_density_base": 1.0, "void_young_base": 1.0, "interface_eps": 0.1},
        "objective": {"indices": [1], "psi_kind": "neg_min_first", "gamma": 1e-3},
        "constraints": {"mean": [0.5, 0.5]},
        "optimizer": {"max_iter": 2, "initial_noise": 0.01},
    }
