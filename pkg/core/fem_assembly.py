"""
Assembly of the discrete elasticity forms on P1 triangles.

Matrices are scipy CSR matrices holding both triangles of the (exactly symmetric)
operator. Functions taking a DofMap return the Dirichlet-reduced operator on the
free dofs. The phase field enters through its element centroid value.
"""

import numpy as np
import scipy.sparse as sp

from core.exceptions import InvalidInputError
from core.grid import BoundaryTag, DofMap, Mesh
from core.material_model import (
    cutoff_deriv,
    density,
    density_deriv,
    effective_lame,
    effective_lame_deriv,
)
from models.materials import CutoffParams, MaterialSet

SparseSymMatrix = sp.csr_matrix

_P1_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def centroid_values(mesh: Mesh, field: np.ndarray) -> np.ndarray:
    """Element centroid values of a nodal field (nv, ...) -> (nt, ...)."""
    return np.asarray(field)[mesh.triangles].mean(axis=1)


def _check_phase(mesh: Mesh, phi: np.ndarray, mats: MaterialSet | None = None) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != mesh.n_vertices:
        raise InvalidInputError(
            f"phase field must have shape ({mesh.n_vertices}, N), got {phi.shape}")
    if mats is not None and phi.shape[1] != mats.n_materials:
        raise InvalidInputError(
            f"phase field has {phi.shape[1]} components, materials define {mats.n_materials}")
    return phi


def _strain_operator(mesh: Mesh) -> np.ndarray:
    """(nt, 3, 6) Voigt strain-displacement matrices [ε_xx, ε_yy, γ_xy]."""
    g = mesh.shape_gradients
    B = np.zeros((mesh.n_triangles, 3, 6))
    B[:, 0, 0::2] = g[:, :, 0]
    B[:, 1, 1::2] = g[:, :, 1]
    B[:, 2, 0::2] = g[:, :, 1]
    B[:, 2, 1::2] = g[:, :, 0]
    return B


def _isotropic_voigt(lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
    D = np.zeros(lam.shape + (3, 3))
    D[..., 0, 0] = D[..., 1, 1] = lam + 2.0 * mu
    D[..., 0, 1] = D[..., 1, 0] = lam
    D[..., 2, 2] = mu
    return D


def _unit_mass(mesh: Mesh, components: int) -> np.ndarray:
    """(nt, 3c, 3c) exact P1 mass with unit density, per displacement component."""
    block = np.kron(_P1_MASS, np.eye(components))
    return mesh.element_areas[:, None, None] * block


def _scatter(mesh: Mesh, element_matrices: np.ndarray, components: int) -> sp.csr_matrix:
    dofs = mesh.element_dofs(components)
    n = components * mesh.n_vertices
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    element_matrices = 0.5 * (element_matrices + np.swapaxes(element_matrices, 1, 2))
    matrix = sp.coo_matrix((element_matrices.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    return matrix


def _scatter_vector(mesh: Mesh, element_vectors: np.ndarray, components: int) -> np.ndarray:
    out = np.zeros(components * mesh.n_vertices)
    np.add.at(out, mesh.element_dofs(components), element_vectors)
    return out


def _stiffness_elements(mesh: Mesh, lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
    B = _strain_operator(mesh)
    D = _isotropic_voigt(lam, mu)
    return mesh.element_areas[:, None, None] * np.einsum("tki,tkl,tlj->tij", B, D, B)


def _reduce(matrix, dofmap: DofMap | None):
    return matrix if dofmap is None else dofmap.restrict(matrix)


def assemble_stiffness(mesh: Mesh, dofmap: DofMap | None, phi: np.ndarray,
                       mats: MaterialSet, p: CutoffParams) -> SparseSymMatrix:
    """K(φ)_ab = Σ_T E(χ_a) : C(φ̄_T) E(χ_b) |T|."""
    phi = _check_phase(mesh, phi, mats)
    lam, mu = effective_lame(centroid_values(mesh, phi), mats, p)
    return _reduce(_scatter(mesh, _stiffness_elements(mesh, lam, mu), 2), dofmap)


def assemble_mass(mesh: Mesh, dofmap: DofMap | None, phi: np.ndarray,
                  mats: MaterialSet, p: CutoffParams) -> SparseSymMatrix:
    """M(φ)_ab = Σ_T ρ(φ̄_T) ∫_T χ_a·χ_b."""
    phi = _check_phase(mesh, phi, mats)
    rho = density(centroid_values(mesh, phi), mats, p)
    return assemble_weighted_mass(mesh, dofmap, rho)


def assemble_weighted_mass(mesh: Mesh, dofmap: DofMap | None, weights: np.ndarray,
                           components: int = 2) -> SparseSymMatrix:
    """Exact P1 mass matrix with a per-element constant weight."""
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (mesh.n_triangles,))
    elements = weights[:, None, None] * _unit_mass(mesh, components)
    return _reduce(_scatter(mesh, elements, components), dofmap)


def assemble_stiffness_dir(mesh: Mesh, dofmap: DofMap | None, phi: np.ndarray, h: np.ndarray,
                           mats: MaterialSet, p: CutoffParams) -> SparseSymMatrix:
    """Matrix of ⟨E(·), E(·)⟩_{C′(φ)h}; symmetric, generally indefinite."""
    phi = _check_phase(mesh, phi, mats)
    h = _check_phase(mesh, h, mats)
    lam, mu = effective_lame_deriv(centroid_values(mesh, phi), centroid_values(mesh, h), mats, p)
    return _reduce(_scatter(mesh, _stiffness_elements(mesh, lam, mu), 2), dofmap)


def assemble_mass_dir(mesh: Mesh, dofmap: DofMap | None, phi: np.ndarray, h: np.ndarray,
                      mats: MaterialSet, p: CutoffParams) -> SparseSymMatrix:
    """Matrix of ∫ρ′(φ)h u·v."""
    phi = _check_phase(mesh, phi, mats)
    h = _check_phase(mesh, h, mats)
    weights = density_deriv(centroid_values(mesh, phi), centroid_values(mesh, h), mats, p)
    return assemble_weighted_mass(mesh, dofmap, weights)


def assemble_load(mesh: Mesh, dofmap: DofMap | None, phi: np.ndarray,
                  body_force: np.ndarray, traction: np.ndarray) -> np.ndarray:
    """
    load_a = ∫(1 − φ^N) f·χ_a + ∫_{Γ_g} g·χ_a.

    f and g are nodal (nv, 2) fields; the body term uses the exact P1 mass weighted by
    1 − φ^N at the centroid, the traction term the trapezoidal rule on Γ_g edges.
    """
    phi = _check_phase(mesh, phi)
    f = np.asarray(body_force, dtype=float).reshape(-1)
    weights = 1.0 - centroid_values(mesh, phi[:, -1])
    load = assemble_weighted_mass(mesh, None, weights) @ f

    g = np.asarray(traction, dtype=float).reshape(mesh.n_vertices, 2)
    edges = mesh.edges_with(BoundaryTag.NEUMANN_G)
    if edges.size:
        lengths = np.linalg.norm(np.diff(mesh.vertices[edges], axis=1)[:, 0], axis=1)
        contrib = 0.5 * lengths[:, None, None] * g[edges]
        surface = np.zeros((mesh.n_vertices, 2))
        np.add.at(surface, edges, contrib)
        load = load + surface.ravel()
    return load if dofmap is None else dofmap.restrict_vector(load)


def load_gradient_field(mesh: Mesh, phi: np.ndarray, body_force: np.ndarray,
                        y: np.ndarray) -> np.ndarray:
    """Nodal field g with g·h = (∂load/∂φ)[h]·y = −∫h^N f·y; y is a full-dof vector."""
    phi = _check_phase(mesh, phi)
    dofs = mesh.element_dofs(2)
    f_t = np.asarray(body_force, dtype=float).reshape(-1)[dofs]
    y_t = np.asarray(y, dtype=float)[dofs]
    per_element = -np.einsum("ti,tij,tj->t", f_t, _unit_mass(mesh, 2), y_t)
    field = np.zeros_like(phi)
    np.add.at(field[:, -1], mesh.triangles, np.repeat(per_element[:, None] / 3.0, 3, axis=1))
    return field


def weighted_mass_gradient_field(mesh: Mesh, phi: np.ndarray, weight: np.ndarray,
                                 d: np.ndarray) -> np.ndarray:
    """Nodal field g with g·h = ∂/∂φ[h] Σ_T c̄_T (1 − φ̄^N_T) d_Tᵀ M_T d_T (nodal weight c)."""
    phi = _check_phase(mesh, phi)
    dofs = mesh.element_dofs(2)
    d_t = np.asarray(d, dtype=float)[dofs]
    c_bar = centroid_values(mesh, weight)
    per_element = -c_bar * np.einsum("ti,tij,tj->t", d_t, _unit_mass(mesh, 2), d_t)
    field = np.zeros_like(phi)
    np.add.at(field[:, -1], mesh.triangles, np.repeat(per_element[:, None] / 3.0, 3, axis=1))
    return field


def assemble_scalar_laplace(mesh: Mesh, coeff) -> tuple[SparseSymMatrix, SparseSymMatrix]:
    """
    Scalar P1 stiffness of −∇·(a∇u) and mass weighted by a, with a nodal or constant
    coefficient evaluated at element centroids. No boundary conditions (Neumann).
    """
    coeff = np.asarray(coeff, dtype=float)
    a = np.full(mesh.n_triangles, float(coeff)) if coeff.ndim == 0 else centroid_values(mesh, coeff)
    g = mesh.shape_gradients
    stiff = (a * mesh.element_areas)[:, None, None] * np.einsum("tik,tjk->tij", g, g)
    mass = a[:, None, None] * _unit_mass(mesh, 1)
    return _scatter(mesh, stiff, 1), _scatter(mesh, mass, 1)


def bilinear_gradient_field(mesh: Mesh, dofmap: DofMap | None, phi: np.ndarray,
                            u: np.ndarray, v: np.ndarray, mats: MaterialSet, p: CutoffParams,
                            stiffness_coeff: float = 1.0, mass_coeff: float = 0.0) -> np.ndarray:
    """
    Nodal field g (nv, N) such that, for every nodal direction h,

        g·h = a·uᵀK′(φ)[h]v − b·uᵀM′(φ)[h]v

    with a = stiffness_coeff and b = mass_coeff. u and v are free-dof vectors when a
    DofMap is given, full-dof vectors otherwise.
    """
    phi = _check_phase(mesh, phi, mats)
    if dofmap is not None:
        u, v = dofmap.expand(u), dofmap.expand(v)
    dofs = mesh.element_dofs(2)
    u_t, v_t = np.asarray(u)[dofs], np.asarray(v)[dofs]

    B = _strain_operator(mesh)
    eu = np.einsum("tkj,tj->tk", B, u_t)
    ev = np.einsum("tkj,tj->tk", B, v_t)
    tr = (eu[:, 0] + eu[:, 1]) * (ev[:, 0] + ev[:, 1])
    normal = eu[:, 0] * ev[:, 0] + eu[:, 1] * ev[:, 1]
    shear = eu[:, 2] * ev[:, 2]
    lam_i, mu_i = mats.lame[:, 0], mats.lame[:, 1]
    # strain energy of u against v for each pure material tensor C_i
    energy = mesh.element_areas[:, None] * (
        np.outer(tr, lam_i) + np.outer(2.0 * normal + shear, mu_i))
    mass = np.einsum("ti,tij,tj->t", u_t, _unit_mass(mesh, 2), v_t)

    slope = cutoff_deriv(centroid_values(mesh, phi), p)
    per_element = slope * (stiffness_coeff * energy
                           - mass_coeff * mass[:, None] * mats.scaled_densities)
    field = np.zeros_like(phi)
    for a in range(3):
        np.add.at(field, mesh.triangles[:, a], per_element / 3.0)
    return field


def eigen_gradient_field(mesh: Mesh, dofmap: DofMap, phi: np.ndarray, w: np.ndarray, lam: float,
                         mats: MaterialSet, p: CutoffParams) -> np.ndarray:
    """
    Nodal representative of λ′(φ): g·h = wᵀK′[h]w − λ wᵀM′[h]w for every nodal h.
    w must be M(φ)-normalized.
    """
    M = assemble_mass(mesh, dofmap, phi, mats, p)
    norm = float(w @ (M @ w))
    if abs(norm - 1.0) > 1e-8:
        raise InvalidInputError(f"eigenvector is not M-normalized (‖w‖²_M = {norm:.12g})")
    return bilinear_gradient_field(mesh, dofmap, phi, w, w, mats, p,
                                   stiffness_coeff=1.0, mass_coeff=lam)
