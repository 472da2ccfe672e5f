"""
Derivatives of eigenvalues and eigenfunctions with respect to the phase field.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from core.eigensolver import EigenPairs
from core.exceptions import (
    ClusteredEigenvalueError,
    IncompatibleRightHandSideError,
    InvalidInputError,
    SingularSystemError,
)
from core.fem_assembly import (
    assemble_mass,
    assemble_mass_dir,
    assemble_stiffness,
    assemble_stiffness_dir,
    bilinear_gradient_field,
)
from core.grid import DofMap, Mesh
from models.materials import CutoffParams, MaterialSet


def eigenvalue_derivative(mesh: Mesh, dofmap: DofMap, phi: np.ndarray, pairs: EigenPairs,
                          index: int, h: np.ndarray, mats: MaterialSet, p: CutoffParams) -> float:
    """λ′(φ)h = wᵀK′(φ)[h]w − λ wᵀM′(φ)[h]w for a simple eigenvalue (0-based index)."""
    if not pairs.is_simple(index):
        raise ClusteredEigenvalueError(index, pairs.group_of(index))
    lam, w = float(pairs.lambdas[index]), pairs.vectors[:, index]
    dK = assemble_stiffness_dir(mesh, dofmap, phi, h, mats, p)
    dM = assemble_mass_dir(mesh, dofmap, phi, h, mats, p)
    return float(w @ (dK @ w)) - lam * float(w @ (dM @ w))


@dataclass(frozen=True)
class BorderedSystem:
    """
    The augmented system [[K − λM, Mw], [(Mw)ᵀ, 0]] realizing the Fredholm
    alternative: the border fixes the component along w that K − λM leaves free.
    """
    base: sp.csr_matrix
    border: np.ndarray

    @classmethod
    def build(cls, K, M, lam: float, w: np.ndarray) -> "BorderedSystem":
        Mw = np.asarray(M @ w)
        if not np.any(Mw):
            raise InvalidInputError("bordered system needs a nonzero border column")
        return cls(base=sp.csr_matrix(K - lam * M), border=Mw)

    @property
    def matrix(self) -> sp.csc_matrix:
        col = sp.csr_matrix(self.border[:, None])
        return sp.bmat([[self.base, col], [col.T, None]], format="csc")

    def solve(self, rhs: np.ndarray, constraint: float,
              permc_spec: str = "COLAMD") -> tuple[np.ndarray, float]:
        try:
            lu = spla.splu(self.matrix, permc_spec=permc_spec)
        except RuntimeError as e:
            raise SingularSystemError(f"bordered system is singular ({e}); eigenvalue not simple?") from e
        sol = lu.solve(np.append(rhs, constraint))
        return sol[:-1], float(sol[-1])


def eigenfunction_derivative(K, M, dK, dM, lam: float, w: np.ndarray, dlam: float,
                             permc_spec: str = "COLAMD", rtol: float = 1e-10) -> np.ndarray:
    """
    w′(φ)h for a simple, M-normalized eigenpair (λ, w), given K′h, M′h and λ′h.

    Solves (K − λM)u = −K′h w + λ M′h w + λ′h M w with (Mw)ᵀu = −½ wᵀM′h w, the
    discrete form of the normalization (w′h, w)_ρ = −½∫ρ′(φ)h|w|².
    """
    system = BorderedSystem.build(K, M, lam, w)
    rhs = -(dK @ w) + lam * (dM @ w) + dlam * system.border
    kappa = -float(w @ (dM @ w))
    u, alpha = system.solve(rhs, 0.5 * kappa, permc_spec=permc_spec)

    base_u = system.base @ u
    scale = np.linalg.norm(rhs) + np.linalg.norm(base_u) + 1e-300
    residual = np.linalg.norm(base_u + alpha * system.border - rhs)
    # the multiplier is zero for an exact eigenpair and a consistent λ′h
    if abs(alpha) * np.linalg.norm(system.border) > 1e-6 * scale:
        raise IncompatibleRightHandSideError(
            f"right-hand side has a component along w (multiplier {alpha:.3g}); is λ′h consistent?")
    if residual > rtol * scale:
        raise IncompatibleRightHandSideError(f"bordered solve residual {residual:.3g} exceeds tolerance")
    return u


def _check_orthonormal(M, basis: np.ndarray, tol: float = 1e-8) -> None:
    gram = basis.T @ (M @ basis)
    deviation = np.abs(gram - np.eye(basis.shape[1])).max()
    if deviation > tol:
        raise InvalidInputError(f"eigenspace basis is not M-orthonormal (Gram deviation {deviation:.3g})")


def _reduced_matrix(dK, dM, basis: np.ndarray, lam1: float) -> np.ndarray:
    B = basis.T @ (dK @ basis) - lam1 * (basis.T @ (dM @ basis))
    return 0.5 * (B + B.T)


def semi_derivative_first(mesh: Mesh, dofmap: DofMap, phi: np.ndarray, basis: np.ndarray,
                          lam1: float, h: np.ndarray, mats: MaterialSet, p: CutoffParams) -> float:
    """
    One-sided derivative of the (possibly repeated) first eigenvalue in direction h:
    the minimum of u ↦ uᵀK′h u − λ₁ uᵀM′h u over M-normalized u in the eigenspace.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=float).T).T
    M = assemble_mass(mesh, dofmap, phi, mats, p)
    _check_orthonormal(M, basis)
    dK = assemble_stiffness_dir(mesh, dofmap, phi, h, mats, p)
    dM = assemble_mass_dir(mesh, dofmap, phi, h, mats, p)
    return float(np.linalg.eigvalsh(_reduced_matrix(dK, dM, basis, lam1))[0])


def first_cluster_gradient(mesh: Mesh, dofmap: DofMap, phi: np.ndarray, basis: np.ndarray,
                           lam1: float, mats: MaterialSet, p: CutoffParams) -> np.ndarray:
    """
    Nodal gradient of λ₁ along its minimizing eigenfunction.

    The direction tested is the cluster-mean derivative; the eigenfunction attaining the
    minimum of the reduced form for that direction supplies the gradient field.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=float).T).T
    fields = [bilinear_gradient_field(mesh, dofmap, phi, u, u, mats, p, 1.0, lam1) for u in basis.T]
    if len(fields) == 1:
        return fields[0]
    direction = np.mean(fields, axis=0)
    dK = assemble_stiffness_dir(mesh, dofmap, phi, direction, mats, p)
    dM = assemble_mass_dir(mesh, dofmap, phi, direction, mats, p)
    _, Y = np.linalg.eigh(_reduced_matrix(dK, dM, basis, lam1))
    u = basis @ Y[:, 0]
    return bilinear_gradient_field(mesh, dofmap, phi, u, u, mats, p, 1.0, lam1)


def reassemble(mesh: Mesh, dofmap: DofMap, phi: np.ndarray, h: np.ndarray,
               mats: MaterialSet, p: CutoffParams):
    """K, M, K′h, M′h on the free dofs."""
    return (assemble_stiffness(mesh, dofmap, phi, mats, p),
            assemble_mass(mesh, dofmap, phi, mats, p),
            assemble_stiffness_dir(mesh, dofmap, phi, h, mats, p),
            assemble_mass_dir(mesh, dofmap, phi, h, mats, p))
