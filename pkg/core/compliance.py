"""
Loaded elastic state, mean compliance, target-displacement deviation and the
combined objective I = αF + βJ₀ + Ψ(λ's) + γE^ε with its adjoint gradient.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse.linalg as spla

from core.exceptions import InvalidInputError, NonDifferentiableError, SingularSystemError
from core.fem_assembly import (
    assemble_load,
    assemble_stiffness,
    assemble_weighted_mass,
    bilinear_gradient_field,
    centroid_values,
    load_gradient_field,
    weighted_mass_gradient_field,
)
from core.grid import DofMap, Mesh
from core.logger import get_logger
from core.objective import EigenProblem, Evaluation
from core.phasefield import PhaseField
from models.config import LoadsConfig
from models.materials import CutoffParams, MaterialSet

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class LoadCase:
    """Nodal (nv, 2) body force, traction and target displacement, nodal weight c."""
    body_force: np.ndarray
    traction: np.ndarray
    target: np.ndarray
    weight: np.ndarray
    exponent: float = 1.0
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.exponent <= 1.0:
            raise InvalidInputError(f"exponent ν must lie in (0, 1], got {self.exponent}")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise InvalidInputError("α and β must be nonnegative")
        if self.beta > 0.0 and not np.any(np.asarray(self.weight) > 0.0):
            raise InvalidInputError("β > 0 needs a weight c with nonempty support")

    @classmethod
    def from_config(cls, mesh: Mesh, cfg: LoadsConfig) -> "LoadCase":
        nv = mesh.n_vertices
        if cfg.weight_box is None:
            weight = np.ones(nv)
        else:
            box = cfg.weight_box
            weight = mesh.box_mask(box.x0, box.x1, box.y0, box.y1).astype(float)
        return cls(body_force=np.tile(cfg.body_force, (nv, 1)),
                   traction=np.tile(cfg.traction, (nv, 1)),
                   target=np.tile(cfg.target, (nv, 1)),
                   weight=weight, exponent=cfg.exponent, alpha=cfg.alpha, beta=cfg.beta)


class Deviation(NamedTuple):
    value: float
    inner: float
    differentiable: bool


def _solve(K, rhs: np.ndarray, what: str, tol: float = 1e-10) -> np.ndarray:
    """Sparse LU solve with one refinement sweep; a residual above tol·‖rhs‖ is an error."""
    try:
        lu = spla.splu(K.tocsc())
    except RuntimeError as e:
        raise SingularSystemError(f"{what} operator is singular ({e}); is Γ_C empty?") from e
    x = lu.solve(rhs)
    x = x + lu.solve(rhs - K @ x)
    residual = float(np.linalg.norm(K @ x - rhs))
    scale = max(float(np.linalg.norm(rhs)), 1e-300)
    if not np.isfinite(residual) or residual > tol * scale:
        logger.error("compliance.solve_residual", system=what, residual=residual, rhs_norm=scale)
        raise SingularSystemError(
            f"{what} solve left relative residual {residual / scale:.3e} > {tol:g}; "
            "the stiffness is numerically singular")
    return x


def solve_state(mesh: Mesh, dofmap_c: DofMap, phi: PhaseField, load: LoadCase,
                mats: MaterialSet, p: CutoffParams) -> np.ndarray:
    """Full-dof displacement with K(φ)u = load on the free dofs, zero on Γ_C."""
    if dofmap_c.fixed_dofs.size == 0:
        raise SingularSystemError("load case has no clamped boundary Γ_C")
    K = assemble_stiffness(mesh, dofmap_c, phi, mats, p)
    rhs = assemble_load(mesh, dofmap_c, phi, load.body_force, load.traction)
    if not np.any(rhs):
        return np.zeros(dofmap_c.n_dofs)
    return dofmap_c.expand(_solve(K, rhs, "state"))


def mean_compliance(mesh: Mesh, phi: PhaseField, u: np.ndarray, load: LoadCase) -> float:
    """F(u, φ) = ∫(1 − φ^N) f·u + ∫_{Γ_g} g·u."""
    return float(assemble_load(mesh, None, phi, load.body_force, load.traction) @ u)


def _deviation_mass(mesh: Mesh, phi: PhaseField, load: LoadCase):
    weights = centroid_values(mesh, load.weight) * (1.0 - centroid_values(mesh, phi[:, -1]))
    return assemble_weighted_mass(mesh, None, weights)


def target_deviation(mesh: Mesh, phi: PhaseField, u: np.ndarray, load: LoadCase) -> Deviation:
    """J₀ = (∫c(1 − φ^N)|u − u_Ω|²)^ν, flagged non-differentiable at a zero integral when ν < 1."""
    d = np.asarray(u) - load.target.reshape(-1)
    inner = max(float(d @ (_deviation_mass(mesh, phi, load) @ d)), 0.0)
    differentiable = not (inner == 0.0 and load.exponent < 1.0)
    return Deviation(inner ** load.exponent, inner, differentiable)


def solve_adjoint(mesh: Mesh, dofmap_c: DofMap, phi: PhaseField, u: np.ndarray, load: LoadCase,
                  mats: MaterialSet, p: CutoffParams) -> np.ndarray:
    """K(φ)p = α load + 2βν (inner)^{ν−1} M_c (u − u_Ω); full-dof, zero on Γ_C."""
    rhs = load.alpha * assemble_load(mesh, None, phi, load.body_force, load.traction)
    if load.beta > 0.0:
        deviation = target_deviation(mesh, phi, u, load)
        if not deviation.differentiable:
            raise NonDifferentiableError(
                "target deviation is not differentiable where u = u_Ω on supp c (ν < 1)")
        d = np.asarray(u) - load.target.reshape(-1)
        factor = 2.0 * load.beta * load.exponent * deviation.inner ** (load.exponent - 1.0)
        rhs = rhs + factor * (_deviation_mass(mesh, phi, load) @ d)
    rhs = dofmap_c.restrict_vector(rhs)
    if not np.any(rhs):
        return np.zeros(dofmap_c.n_dofs)
    K = assemble_stiffness(mesh, dofmap_c, phi, mats, p)
    return dofmap_c.expand(_solve(K, rhs, "adjoint"))


class CombinedProblem:
    """
    I(φ) = αF(u(φ), φ) + βJ₀(u(φ), φ) + Ψ(λ's) + γE^ε(φ).

    The eigenvalue part reuses EigenProblem on the Γ_D splitting; the state lives on
    the Γ_C splitting. With α = β = 0 no state is solved.
    """

    def __init__(self, eigen: EigenProblem, dofmap_c: DofMap, load: LoadCase):
        self.eigen = eigen
        self.dofmap_c = dofmap_c
        self.load = load

    @property
    def n_targets(self) -> int:
        return self.eigen.n_targets

    @property
    def _loaded(self) -> bool:
        return self.load.alpha > 0.0 or self.load.beta > 0.0

    def evaluate(self, phi: PhaseField) -> Evaluation:
        base = self.eigen.evaluate(phi)
        if not self._loaded:
            return base
        mesh, e = self.eigen.mesh, self.eigen
        u = solve_state(mesh, self.dofmap_c, phi, self.load, e.mats, e.cutoff)
        compliance = mean_compliance(mesh, phi, u, self.load)
        deviation = target_deviation(mesh, phi, u, self.load).value if self.load.beta > 0.0 else 0.0
        value = base.value + self.load.alpha * compliance + self.load.beta * deviation
        return Evaluation(value=value, psi=base.psi, gl_energy=base.gl_energy, lambdas=base.lambdas,
                          pairs=base.pairs, compliance=compliance, deviation=deviation, state=u)

    def _load_gradient(self, phi: PhaseField, u: np.ndarray) -> np.ndarray:
        """Nodal gradient of αF + βJ₀ through the state, by the adjoint method."""
        mesh, e, load = self.eigen.mesh, self.eigen, self.load
        if load.beta == 0.0:
            adj = load.alpha * u
        else:
            adj = solve_adjoint(mesh, self.dofmap_c, phi, u, load, e.mats, e.cutoff)
        g = load_gradient_field(mesh, phi, load.body_force, load.alpha * u + adj)
        g = g + bilinear_gradient_field(mesh, None, phi, adj, u, e.mats, e.cutoff,
                                        stiffness_coeff=-1.0)
        if load.beta > 0.0:
            deviation = target_deviation(mesh, phi, u, load)
            d = np.asarray(u) - load.target.reshape(-1)
            factor = load.beta * load.exponent * deviation.inner ** (load.exponent - 1.0)
            g = g + factor * weighted_mass_gradient_field(mesh, phi, load.weight, d)
        return g

    def gradient(self, phi: PhaseField, evaluation: Evaluation) -> np.ndarray:
        g = self.eigen.gradient(phi, evaluation)
        if not self._loaded:
            return g
        return g + self._load_gradient(phi, evaluation.state)

    def directional_derivative(self, phi: PhaseField, evaluation: Evaluation, h: np.ndarray) -> float:
        value = self.eigen.directional_derivative(phi, evaluation, h)
        if not self._loaded:
            return value
        return value + float(np.sum(self._load_gradient(phi, evaluation.state) * h))


def combined_objective(problem: CombinedProblem, phi: PhaseField) -> float:
    return problem.evaluate(phi).value


def combined_gradient(problem: CombinedProblem, phi: PhaseField,
                      evaluation: Evaluation | None = None) -> np.ndarray:
    evaluation = evaluation or problem.evaluate(phi)
    return problem.gradient(phi, evaluation)
