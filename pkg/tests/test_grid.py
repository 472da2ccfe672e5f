import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.exceptions import InvalidInputError
from core.grid import BoundaryTag, build_dof_map, build_rect_mesh
from tests.conftest import CANTILEVER, CLAMPED


def test_counts_and_areas(cantilever):
    assert cantilever.n_vertices == 7 * 4
    assert cantilever.n_triangles == 2 * 6 * 3
    assert np.all(cantilever.element_areas > 0.0)
    assert_allclose(cantilever.element_areas.sum(), 2.0)
    assert_allclose(cantilever.vertex_weights.sum(), cantilever.area)


def test_shape_gradients_reproduce_linear_functions(cantilever):
    # barycentric gradients sum to zero and reproduce ∇x = (1, 0)
    g = cantilever.shape_gradients
    assert_allclose(g.sum(axis=1), 0.0, atol=1e-12)
    x = cantilever.vertices[cantilever.triangles][:, :, 0]
    assert_allclose(np.einsum("ta,tak->tk", x, g), np.tile([1.0, 0.0], (cantilever.n_triangles, 1)),
                    atol=1e-12)


def test_boundary_tags(cantilever):
    assert len(cantilever.boundary_edges) == 2 * (6 + 3)
    assert len(cantilever.edges_with(BoundaryTag.DIRICHLET_D)) == 3
    assert len(cantilever.edges_with(BoundaryTag.NEUMANN_0)) == 15
    # load splitting defaults to the counterpart of the eigen splitting
    assert len(cantilever.edges_with(BoundaryTag.DIRICHLET_C)) == 3
    assert len(cantilever.edges_with(BoundaryTag.NEUMANN_G)) == 15
    assert_allclose(cantilever.edge_lengths.sum(), 2 * (2.0 + 1.0))


def test_explicit_load_splitting():
    load = {"left": "DIRICHLET_C", "right": "NEUMANN_G", "top": "DIRICHLET_C", "bottom": "DIRICHLET_C"}
    mesh = build_rect_mesh(4, 2, 2.0, 1.0, CANTILEVER, load)
    right = mesh.edges_with(BoundaryTag.NEUMANN_G)
    assert len(right) == 2
    assert_allclose(mesh.vertices[right][:, :, 0], 2.0)


def test_dof_map(cantilever, cantilever_dofs):
    # the four vertices on x = 0 are clamped in both components
    assert cantilever_dofs.fixed_dofs.size == 8
    assert cantilever_dofs.n_free == 2 * cantilever.n_vertices - 8
    left = np.flatnonzero(cantilever.vertices[:, 0] == 0.0)
    assert_array_equal(cantilever_dofs.fixed_dofs, np.sort(np.concatenate([2 * left, 2 * left + 1])))

    full = np.arange(cantilever_dofs.n_dofs, dtype=float) + 1.0
    lifted = cantilever_dofs.expand(cantilever_dofs.restrict_vector(full))
    assert_array_equal(lifted[cantilever_dofs.fixed_dofs], 0.0)
    assert_array_equal(lifted[cantilever_dofs.free_dofs], full[cantilever_dofs.free_dofs])


def test_neumann_dof_map_is_all_free(cantilever):
    dofs = build_dof_map(cantilever, None, components=1)
    assert dofs.n_free == cantilever.n_vertices
    assert dofs.fixed_dofs.size == 0


def test_alternating_mesh_has_square_symmetry():
    mesh = build_rect_mesh(4, 4, 1.0, 1.0, CLAMPED, diagonal="alternating")
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)

    def canonical(points):
        points = np.round(points, 12)
        return points[np.lexsort(points.T[::-1])]

    rotated = np.column_stack([1.0 - centroids[:, 1], centroids[:, 0]])
    mirrored = np.column_stack([centroids[:, 1], centroids[:, 0]])
    assert_allclose(canonical(rotated), canonical(centroids), atol=1e-12)
    assert_allclose(canonical(mirrored), canonical(centroids), atol=1e-12)


def test_forward_mesh_is_not_rotation_invariant():
    mesh = build_rect_mesh(4, 4, 1.0, 1.0, CLAMPED)
    centroids = np.round(mesh.vertices[mesh.triangles].mean(axis=1), 12)
    rotated = np.round(np.column_stack([1.0 - centroids[:, 1], centroids[:, 0]]), 12)
    assert {tuple(p) for p in rotated} != {tuple(p) for p in centroids}


def test_box_mask(cantilever):
    mask = cantilever.box_mask(0.0, 2.0 / 6.0, 0.0, 1.0)
    # two columns of four vertices
    assert mask.sum() == 8


@pytest.mark.parametrize("spec", [
    {"left": "DIRICHLET_D", "right": "NEUMANN_0", "top": "NEUMANN_0"},
    {"left": "DIRICHLET_C", "right": "NEUMANN_0", "top": "NEUMANN_0", "bottom": "NEUMANN_0"},
    {"left": "CLAMPED", "right": "NEUMANN_0", "top": "NEUMANN_0", "bottom": "NEUMANN_0"},
])
def test_bad_boundary_spec(spec):
    with pytest.raises(InvalidInputError):
        build_rect_mesh(2, 2, 1.0, 1.0, spec)


def test_bad_dimensions():
    with pytest.raises(InvalidInputError):
        build_rect_mesh(0, 2, 1.0, 1.0, CLAMPED)
    with pytest.raises(InvalidInputError):
        build_rect_mesh(2, 2, -1.0, 1.0, CLAMPED)
    with pytest.raises(InvalidInputError):
        build_rect_mesh(2, 2, 1.0, 1.0, CLAMPED, diagonal="backward")
