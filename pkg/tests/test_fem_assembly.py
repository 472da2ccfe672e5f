import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.exceptions import InvalidInputError
from core.fem_assembly import (
    assemble_load,
    assemble_mass,
    assemble_mass_dir,
    assemble_scalar_laplace,
    assemble_stiffness,
    assemble_stiffness_dir,
    assemble_weighted_mass,
    bilinear_gradient_field,
    eigen_gradient_field,
    load_gradient_field,
    weighted_mass_gradient_field,
)
from core.grid import build_rect_mesh
from tests.conftest import CANTILEVER, direction, interior_phase


def _rigid_motions(mesh):
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    ones, zeros = np.ones_like(x), np.zeros_like(x)
    return [np.column_stack(c).ravel() for c in ((ones, zeros), (zeros, ones), (-y, x))]


def test_matrices_are_symmetric(cantilever, cantilever_dofs, mats2, cutoff2, rng):
    phi = interior_phase(cantilever.n_vertices, 2, rng)
    K = assemble_stiffness(cantilever, cantilever_dofs, phi, mats2, cutoff2)
    M = assemble_mass(cantilever, cantilever_dofs, phi, mats2, cutoff2)
    assert K.shape == M.shape == (cantilever_dofs.n_free,) * 2
    assert abs(K - K.T).max() <= 1e-15 * abs(K).max()
    assert abs(M - M.T).max() <= 1e-15 * abs(M).max()
    # positive definite on the free dofs
    assert np.linalg.eigvalsh(M.toarray()).min() > 0.0
    assert np.linalg.eigvalsh(K.toarray()).min() > 0.0


def test_rigid_motions_have_zero_energy(cantilever, mats2, cutoff2, rng):
    phi = interior_phase(cantilever.n_vertices, 2, rng)
    K = assemble_stiffness(cantilever, None, phi, mats2, cutoff2)
    scale = abs(K).max()
    for u in _rigid_motions(cantilever):
        assert np.abs(K @ u).max() <= 1e-12 * scale


def test_mass_integrates_density(cantilever, mats2, cutoff2):
    phi = np.tile([0.7, 0.3], (cantilever.n_vertices, 1))
    M = assemble_mass(cantilever, None, phi, mats2, cutoff2)
    rho = 0.7 * 1.0 + 0.3 * 0.1 ** 2
    translation = _rigid_motions(cantilever)[0]
    assert translation @ (M @ translation) == pytest.approx(rho * cantilever.area)


def test_directional_matrices_are_exact_in_the_interior(cantilever, cantilever_dofs, mats2, cutoff2, rng):
    # the cut-off is the identity here, so K and M are affine in φ
    phi = interior_phase(cantilever.n_vertices, 2, rng)
    h = direction(cantilever.n_vertices, 2, rng)
    t = 1e-2
    for assemble, assemble_dir in ((assemble_stiffness, assemble_stiffness_dir),
                                   (assemble_mass, assemble_mass_dir)):
        diff = (assemble(cantilever, cantilever_dofs, phi + t * h, mats2, cutoff2)
                - assemble(cantilever, cantilever_dofs, phi, mats2, cutoff2)) / t
        exact = assemble_dir(cantilever, cantilever_dofs, phi, h, mats2, cutoff2)
        assert abs(diff - exact).max() <= 1e-10 * abs(exact).max()


def test_bilinear_gradient_field(cantilever, cantilever_dofs, mats3, rng):
    from models.materials import CutoffParams
    p = CutoffParams.default_for(mats3)
    phi = interior_phase(cantilever.n_vertices, 3, rng)
    u = rng.standard_normal(cantilever_dofs.n_free)
    v = rng.standard_normal(cantilever_dofs.n_free)
    g = bilinear_gradient_field(cantilever, cantilever_dofs, phi, u, v, mats3, p,
                                stiffness_coeff=0.7, mass_coeff=2.5)
    for _ in range(3):
        h = direction(cantilever.n_vertices, 3, rng)
        dK = assemble_stiffness_dir(cantilever, cantilever_dofs, phi, h, mats3, p)
        dM = assemble_mass_dir(cantilever, cantilever_dofs, phi, h, mats3, p)
        expected = 0.7 * (u @ (dK @ v)) - 2.5 * (u @ (dM @ v))
        assert np.sum(g * h) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_eigen_gradient_field_needs_normalized_vector(cantilever, cantilever_dofs, mats2, cutoff2, rng):
    phi = interior_phase(cantilever.n_vertices, 2, rng)
    w = rng.standard_normal(cantilever_dofs.n_free)
    with pytest.raises(InvalidInputError):
        eigen_gradient_field(cantilever, cantilever_dofs, phi, w, 1.0, mats2, cutoff2)


def test_body_load_and_traction():
    load_sides = {"left": "DIRICHLET_C", "right": "NEUMANN_G", "top": "DIRICHLET_C", "bottom": "DIRICHLET_C"}
    mesh = build_rect_mesh(4, 2, 2.0, 1.0, CANTILEVER, load_sides)
    nv = mesh.n_vertices
    solid = np.tile([1.0, 0.0], (nv, 1))
    down = np.tile([0.0, -1.0], (nv, 1))
    zero = np.zeros((nv, 2))
    body = assemble_load(mesh, None, solid, down, zero).reshape(-1, 2)
    assert body[:, 1].sum() == pytest.approx(-mesh.area)
    assert body[:, 0].sum() == pytest.approx(0.0)
    # void cells carry no body force
    void = np.tile([0.0, 1.0], (nv, 1))
    assert np.abs(assemble_load(mesh, None, void, down, zero)).max() == 0.0
    push = np.tile([1.0, 0.0], (nv, 1))
    surface = assemble_load(mesh, None, solid, zero, push).reshape(-1, 2)
    assert surface[:, 0].sum() == pytest.approx(mesh.ly)
    assert np.all(surface[mesh.vertices[:, 0] < mesh.lx] == 0.0)


def test_load_gradient_field(cantilever, rng):
    nv = cantilever.n_vertices
    phi = interior_phase(nv, 2, rng)
    f = rng.standard_normal((nv, 2))
    g = np.zeros((nv, 2))
    y = rng.standard_normal(2 * nv)
    field = load_gradient_field(cantilever, phi, f, y)
    h = direction(nv, 2, rng)
    diff = (assemble_load(cantilever, None, phi + h, f, g) - assemble_load(cantilever, None, phi, f, g)) @ y
    assert np.sum(field * h) == pytest.approx(diff, rel=1e-10)
    assert np.all(field[:, 0] == 0.0)


def test_weighted_mass_gradient_field(cantilever, rng):
    from core.fem_assembly import centroid_values
    nv = cantilever.n_vertices
    phi = interior_phase(nv, 2, rng)
    c = rng.uniform(0.0, 1.0, nv)
    d = rng.standard_normal(2 * nv)
    h = direction(nv, 2, rng)

    def quadratic(field):
        weights = centroid_values(cantilever, c) * (1.0 - centroid_values(cantilever, field[:, -1]))
        return d @ (assemble_weighted_mass(cantilever, None, weights) @ d)

    field = weighted_mass_gradient_field(cantilever, phi, c, d)
    assert np.sum(field * h) == pytest.approx(quadratic(phi + h) - quadratic(phi), rel=1e-10)


def test_scalar_laplace(cantilever):
    S, M = assemble_scalar_laplace(cantilever, 1.0)
    ones = np.ones(cantilever.n_vertices)
    assert np.abs(S @ ones).max() <= 1e-12
    assert ones @ (M @ ones) == pytest.approx(cantilever.area)
    x = cantilever.vertices[:, 0]
    # ∫|∇x|² = |Ω|
    assert x @ (S @ x) == pytest.approx(cantilever.area)


def test_phase_shape_is_checked(cantilever, cantilever_dofs, mats2, cutoff2):
    with pytest.raises(InvalidInputError):
        assemble_stiffness(cantilever, cantilever_dofs, np.full((3, 2), 0.5), mats2, cutoff2)
    with pytest.raises(InvalidInputError):
        assemble_mass(cantilever, cantilever_dofs, np.full((cantilever.n_vertices, 3), 1 / 3), mats2, cutoff2)
