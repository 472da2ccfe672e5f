"""
Structured P1 triangulation of the rectangular design domain with tagged boundary segments.
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Literal, Mapping

import numpy as np

from core.exceptions import InvalidInputError


class BoundaryTag(str, Enum):
    DIRICHLET_D = "DIRICHLET_D"  # Γ_D: clamped for the eigenproblem
    NEUMANN_0 = "NEUMANN_0"      # Γ_0: traction free for the eigenproblem
    DIRICHLET_C = "DIRICHLET_C"  # Γ_C: clamped for the load case
    NEUMANN_G = "NEUMANN_G"      # Γ_g: loaded by the traction g


class Side(str, Enum):
    BOTTOM = "bottom"
    RIGHT = "right"
    TOP = "top"
    LEFT = "left"


EIGEN_TAGS = frozenset({BoundaryTag.DIRICHLET_D, BoundaryTag.NEUMANN_0})
LOAD_TAGS = frozenset({BoundaryTag.DIRICHLET_C, BoundaryTag.NEUMANN_G})

_LOAD_COUNTERPART = {
    BoundaryTag.DIRICHLET_D: BoundaryTag.DIRICHLET_C,
    BoundaryTag.NEUMANN_0: BoundaryTag.NEUMANN_G,
}


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Immutable triangle mesh.

    Attributes:
        vertices: (nv, 2) coordinates, row-major over the grid.
        triangles: (nt, 3) counterclockwise vertex indices.
        boundary_edges: (ne, 2) vertex pairs on ∂Ω.
        edge_tags: tag of each boundary edge in the eigenproblem splitting (Γ_D / Γ_0).
        load_tags: tag of each boundary edge in the load splitting (Γ_C / Γ_g).
        element_areas: (nt,) positive areas.
        shape_gradients: (nt, 3, 2) constant gradients of the three barycentric basis functions.
    """
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: tuple[BoundaryTag, ...]
    load_tags: tuple[BoundaryTag, ...]
    element_areas: np.ndarray
    shape_gradients: np.ndarray
    lx: float
    ly: float

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @cached_property
    def vertex_weights(self) -> np.ndarray:
        """Lumped nodal weights ∫χ_v; they sum to |Ω|."""
        weights = np.zeros(self.n_vertices)
        np.add.at(weights, self.triangles, np.repeat(self.element_areas[:, None] / 3.0, 3, axis=1))
        return weights

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    def element_dofs(self, components: int = 2) -> np.ndarray:
        """(nt, 3*components) global dof indices, interleaved per vertex."""
        offsets = np.arange(components)
        return (components * self.triangles[:, :, None] + offsets).reshape(self.n_triangles, -1)

    def edges_with(self, tag: BoundaryTag) -> np.ndarray:
        tags = self.edge_tags if tag in EIGEN_TAGS else self.load_tags
        mask = np.array([t == tag for t in tags], dtype=bool)
        return self.boundary_edges[mask]

    def box_mask(self, x0: float, x1: float, y0: float, y1: float) -> np.ndarray:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        tol = 1e-12 * max(self.lx, self.ly)
        return (x >= x0 - tol) & (x <= x1 + tol) & (y >= y0 - tol) & (y <= y1 + tol)


@dataclass(frozen=True)
class DofMap:
    """Partition of the nodal unknowns into free and Dirichlet-fixed indices."""
    n_dofs: int
    components: int
    free_dofs: np.ndarray
    fixed_dofs: np.ndarray

    @property
    def n_free(self) -> int:
        return self.free_dofs.size

    def restrict(self, matrix):
        """Eliminate fixed rows and columns of a global sparse matrix."""
        return matrix[self.free_dofs][:, self.free_dofs].tocsr()

    def restrict_vector(self, vector: np.ndarray) -> np.ndarray:
        return np.asarray(vector)[self.free_dofs]

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        """Lift free-dof vectors (or column blocks) to the full dof set, zero on fixed dofs."""
        reduced = np.asarray(reduced)
        full = np.zeros((self.n_dofs,) + reduced.shape[1:], dtype=reduced.dtype)
        full[self.free_dofs] = reduced
        return full


def _side_edges(nx: int, ny: int) -> dict[Side, list[tuple[int, int]]]:
    row = nx + 1
    return {
        Side.BOTTOM: [(i, i + 1) for i in range(nx)],
        Side.RIGHT: [(j * row + nx, (j + 1) * row + nx) for j in range(ny)],
        Side.TOP: [(ny * row + i + 1, ny * row + i) for i in range(nx)],
        Side.LEFT: [((j + 1) * row, j * row) for j in range(ny)],
    }


def _shape_gradients(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Areas and barycentric gradients for (nt, 3, 2) triangle coordinates."""
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    areas = 0.5 * det
    # gradient of λ_a is the inward edge normal opposite vertex a divided by 2·area
    grads = np.empty_like(coords)
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        edge = coords[:, c] - coords[:, b]
        grads[:, a, 0] = -edge[:, 1] / det
        grads[:, a, 1] = edge[:, 0] / det
    return areas, grads


def build_rect_mesh(
    nx: int,
    ny: int,
    lx: float,
    ly: float,
    boundary_spec: Mapping[Side | str, BoundaryTag | str],
    load_spec: Mapping[Side | str, BoundaryTag | str] | None = None,
    diagonal: Literal["forward", "alternating"] = "forward",
) -> Mesh:
    """
    Triangulate [0, lx] x [0, ly] with nx by ny cells, two triangles per cell.

    The default splits every cell along its lower-left to upper-right diagonal.
    `diagonal="alternating"` flips the diagonal on cells with odd i+j, which for an
    even square grid gives a mesh invariant under the full symmetry group of the square.

    `boundary_spec` assigns Γ_D / Γ_0 tags per side; `load_spec` assigns Γ_C / Γ_g tags
    and defaults to the counterpart of `boundary_spec` (clamped stays clamped).
    """
    if nx < 1 or ny < 1:
        raise InvalidInputError(f"mesh needs at least one cell per direction, got {nx}x{ny}")
    if not (lx > 0.0 and ly > 0.0):
        raise InvalidInputError(f"domain lengths must be positive, got {lx}x{ly}")
    if diagonal not in ("forward", "alternating"):
        raise InvalidInputError(f"unknown diagonal convention {diagonal!r}")

    eigen_tags = _resolve_sides(boundary_spec, EIGEN_TAGS, "boundary_spec")
    if load_spec is None:
        load_tags = {side: _LOAD_COUNTERPART[tag] for side, tag in eigen_tags.items()}
    else:
        load_tags = _resolve_sides(load_spec, LOAD_TAGS, "load_spec")

    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (jj * (nx + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    forward = np.ones(v00.size, dtype=bool)
    if diagonal == "alternating":
        forward = ((ii + jj) % 2 == 0).ravel()
    lower = np.where(forward[:, None],
                     np.column_stack([v00, v10, v11]), np.column_stack([v00, v10, v01]))
    upper = np.where(forward[:, None],
                     np.column_stack([v00, v11, v01]), np.column_stack([v10, v11, v01]))
    triangles = np.empty((2 * v00.size, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    areas, grads = _shape_gradients(vertices[triangles])
    if np.any(areas <= 0.0):
        raise InvalidInputError("degenerate or clockwise triangle produced")

    edges, tags, ltags = [], [], []
    for side, side_edges in _side_edges(nx, ny).items():
        edges.extend(side_edges)
        tags.extend([eigen_tags[side]] * len(side_edges))
        ltags.extend([load_tags[side]] * len(side_edges))

    for array in (vertices, triangles, areas, grads):
        array.setflags(write=False)
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=np.asarray(edges, dtype=np.int64),
        edge_tags=tuple(tags),
        load_tags=tuple(ltags),
        element_areas=areas,
        shape_gradients=grads,
        lx=float(lx),
        ly=float(ly),
    )


def _resolve_sides(spec, allowed, what) -> dict[Side, BoundaryTag]:
    resolved = {}
    for key, value in spec.items():
        try:
            side, tag = Side(key), BoundaryTag(value)
        except ValueError as e:
            raise InvalidInputError(f"{what}: {e}") from e
        if tag not in allowed:
            raise InvalidInputError(f"{what}: tag {tag.value} not allowed on side {side.value}")
        resolved[side] = tag
    missing = [s.value for s in Side if s not in resolved]
    if missing:
        raise InvalidInputError(f"{what}: no tag for side(s) {', '.join(missing)}")
    return resolved


def build_dof_map(mesh: Mesh, dirichlet_tag: BoundaryTag | None, components: int = 2) -> DofMap:
    """
    Fix every component of each vertex touching an edge tagged `dirichlet_tag`.

    `dirichlet_tag=None` leaves all dofs free (scalar Neumann problems use components=1).
    """
    n_dofs = components * mesh.n_vertices
    if dirichlet_tag is None:
        fixed_vertices = np.empty(0, dtype=np.int64)
    else:
        fixed_vertices = np.unique(mesh.edges_with(dirichlet_tag).ravel())
    fixed = (components * fixed_vertices[:, None] + np.arange(components)).ravel()
    free = np.setdiff1d(np.arange(n_dofs), fixed)
    return DofMap(n_dofs=n_dofs, components=components,
                  free_dofs=free, fixed_dofs=np.sort(fixed))
