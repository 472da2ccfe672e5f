"""
Eigenvalue objective J(φ) = Ψ(λ_{i_1}, ..., λ_{i_l}) + γE^ε(φ), its gradient and
first-order optimality measures.
"""

from dataclasses import dataclass
from typing import Protocol

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from core.config import settings
from core.eigensolver import EigenPairs, smallest_eigenpairs
from core.exceptions import (
    ConvergenceError,
    DegenerateEigenvalueError,
    InvalidInputError,
    ObjectiveBoundError,
)
from core.fem_assembly import assemble_mass, assemble_stiffness, eigen_gradient_field
from core.grid import DofMap, Mesh
from core.logger import get_logger
from core.phasefield import AdmissibleSet, PhaseField, ginzburg_landau, ginzburg_landau_grad
from core.sensitivity import eigenvalue_derivative, first_cluster_gradient, semi_derivative_first
from models.config import ObjectiveSpec, PsiKind
from models.materials import CutoffParams, MaterialSet

logger = get_logger(__name__)


def psi_value(spec: ObjectiveSpec, lambdas: np.ndarray) -> float:
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.size == 0:
        return 0.0
    c = np.asarray(spec.coefficients)
    if spec.psi_kind is PsiKind.WEIGHTED_SUM:
        return float(c @ lambdas)
    if spec.psi_kind is PsiKind.NEG_MIN_FIRST:
        return -float(lambdas[0])
    return float(np.sum(c / lambdas))


def psi_grad(spec: ObjectiveSpec, lambdas: np.ndarray) -> np.ndarray:
    """∂Ψ/∂λ_{i_j} for j = 1..l."""
    lambdas = np.asarray(lambdas, dtype=float)
    c = np.asarray(spec.coefficients)
    if spec.psi_kind is PsiKind.WEIGHTED_SUM:
        return c.copy()
    if spec.psi_kind is PsiKind.NEG_MIN_FIRST:
        return np.array([-1.0])
    return -c / lambdas ** 2


@dataclass(frozen=True)
class Evaluation:
    """Objective value at one design together with everything needed to differentiate it."""
    value: float
    psi: float
    gl_energy: float
    lambdas: np.ndarray
    pairs: EigenPairs | None = None
    compliance: float | None = None
    deviation: float | None = None
    state: np.ndarray | None = None


class DesignProblem(Protocol):
    """What the projected-gradient driver needs from an objective."""

    n_targets: int

    def evaluate(self, phi: PhaseField) -> Evaluation: ...

    def gradient(self, phi: PhaseField, evaluation: Evaluation) -> np.ndarray: ...

    def directional_derivative(self, phi: PhaseField, evaluation: Evaluation, h: np.ndarray) -> float: ...


class EigenProblem:
    """J(φ) = Ψ(λ's) + γE^ε(φ) on a fixed mesh, Γ_D elimination and material set."""

    def __init__(self, mesh: Mesh, dofmap: DofMap, spec: ObjectiveSpec, mats: MaterialSet,
                 cutoff: CutoffParams | None = None, eigen_tol: float | None = None,
                 cluster_tol: float | None = None):
        self.mesh = mesh
        self.dofmap = dofmap
        self.spec = spec
        self.mats = mats
        self.cutoff = cutoff or CutoffParams.default_for(mats)
        self.eigen_tol = settings.eigen_tol if eigen_tol is None else eigen_tol
        self.cluster_tol = settings.cluster_tol if cluster_tol is None else cluster_tol
        self.targets = np.asarray(spec.indices, dtype=int) - 1
        if self.targets.size and self.targets.max() >= dofmap.n_free:
            raise InvalidInputError(
                f"eigenvalue index {spec.indices[-1]} exceeds the {dofmap.n_free} free dofs")

    @property
    def n_targets(self) -> int:
        return int(self.targets.size)

    def solve_eigenpairs(self, phi: PhaseField, k: int) -> EigenPairs:
        K = assemble_stiffness(self.mesh, self.dofmap, phi, self.mats, self.cutoff)
        M = assemble_mass(self.mesh, self.dofmap, phi, self.mats, self.cutoff)
        return smallest_eigenpairs(K, M, min(k, self.dofmap.n_free), tol=self.eigen_tol,
                                   cluster_tol=self.cluster_tol)

    def evaluate(self, phi: PhaseField) -> Evaluation:
        gl = ginzburg_landau(self.mesh, phi, self.spec.gamma, self.spec.epsilon)
        if not self.n_targets:
            return Evaluation(value=gl, psi=0.0, gl_energy=gl, lambdas=np.empty(0))
        pairs = self.solve_eigenpairs(phi, int(self.targets.max()) + 1)
        lambdas = pairs.lambdas[self.targets]
        psi = psi_value(self.spec, lambdas)
        value = psi + gl
        if value < -self.spec.bound:
            raise ObjectiveBoundError(f"objective {value:.6g} fell below −c_Ψ = {-self.spec.bound:.6g}")
        return Evaluation(value=value, psi=psi, gl_energy=gl, lambdas=lambdas, pairs=pairs)

    def _cluster_basis(self, phi: PhaseField, pairs: EigenPairs, index: int) -> tuple[np.ndarray, float]:
        start, stop = pairs.group_of(index)
        while stop > len(pairs) and len(pairs) < self.dofmap.n_free:
            pairs = self.solve_eigenpairs(phi, stop)
            start, stop = pairs.group_of(index)
        stop = min(stop, len(pairs))
        return pairs.vectors[:, start:stop], float(pairs.lambdas[start])

    def _check_targets(self, pairs: EigenPairs) -> None:
        for i in self.targets:
            if pairs.is_simple(i):
                continue
            if self.spec.psi_kind is PsiKind.NEG_MIN_FIRST and i == 0:
                continue
            raise DegenerateEigenvalueError(int(i), pairs.group_of(i))

    def gradient(self, phi: PhaseField, evaluation: Evaluation) -> np.ndarray:
        """Σ_j ∂Ψ/∂λ_{i_j} λ′_{i_j}(φ) + γ(E^ε)′(φ) as a nodal field."""
        g = ginzburg_landau_grad(self.mesh, phi, self.spec.gamma, self.spec.epsilon)
        if not self.n_targets:
            return g
        pairs = evaluation.pairs
        self._check_targets(pairs)
        weights = psi_grad(self.spec, evaluation.lambdas)
        for weight, i in zip(weights, self.targets):
            if pairs.is_simple(i):
                field = eigen_gradient_field(self.mesh, self.dofmap, phi, pairs.vectors[:, i],
                                             float(pairs.lambdas[i]), self.mats, self.cutoff)
            else:
                basis, lam1 = self._cluster_basis(phi, pairs, i)
                logger.info("objective.cluster_surrogate", multiplicity=basis.shape[1], lambda_1=lam1)
                field = first_cluster_gradient(self.mesh, self.dofmap, phi, basis, lam1,
                                               self.mats, self.cutoff)
            g = g + weight * field
        return g

    def directional_derivative(self, phi: PhaseField, evaluation: Evaluation, h: np.ndarray) -> float:
        """
        J′(φ)h from the directional forms; a repeated λ₁ under −λ₁ contributes the
        negated one-sided derivative.
        """
        h = np.asarray(h, dtype=float)
        value = float(np.sum(ginzburg_landau_grad(self.mesh, phi, self.spec.gamma, self.spec.epsilon) * h))
        if not self.n_targets:
            return value
        pairs = evaluation.pairs
        self._check_targets(pairs)
        weights = psi_grad(self.spec, evaluation.lambdas)
        for weight, i in zip(weights, self.targets):
            if pairs.is_simple(i):
                d = eigenvalue_derivative(self.mesh, self.dofmap, phi, pairs, int(i), h,
                                          self.mats, self.cutoff)
            else:
                basis, lam1 = self._cluster_basis(phi, pairs, i)
                d = semi_derivative_first(self.mesh, self.dofmap, phi, basis, lam1, h,
                                          self.mats, self.cutoff)
            value += float(weight) * d
        return value


def objective_eval(mesh: Mesh, dofmap: DofMap, phi: PhaseField, spec: ObjectiveSpec,
                   mats: MaterialSet, cutoff: CutoffParams | None = None) -> Evaluation:
    return EigenProblem(mesh, dofmap, spec, mats, cutoff).evaluate(phi)


def objective_grad(mesh: Mesh, dofmap: DofMap, phi: PhaseField, spec: ObjectiveSpec,
                   evaluation: Evaluation, mats: MaterialSet,
                   cutoff: CutoffParams | None = None) -> np.ndarray:
    return EigenProblem(mesh, dofmap, spec, mats, cutoff).gradient(phi, evaluation)


def vi_residual(problem: DesignProblem, phi: PhaseField, evaluation: Evaluation,
                points, admissible: AdmissibleSet, tol: float = 1e-10) -> float:
    """min over admissible points ϑ of J′(φ)(ϑ − φ); nonnegative at a stationary point."""
    points = list(points)
    if not points:
        raise InvalidInputError("vi_residual needs at least one admissible point")
    values = []
    for n, point in enumerate(points):
        if not admissible.contains(point, tol):
            raise InvalidInputError(f"point {n} is not admissible")
        values.append(problem.directional_derivative(phi, evaluation, np.asarray(point) - phi))
    return float(min(values))


def vi_gap(gradient: np.ndarray, phi: PhaseField, admissible: AdmissibleSet) -> float:
    """
    min over the whole admissible set of g·(ϑ − φ), a linear program over nodal
    simplex vectors with the mean and fixed-region constraints. Zero exactly when
    φ satisfies the discrete variational inequality.
    """
    g = np.asarray(gradient, dtype=float)
    nv, n = g.shape
    rows = [sp.kron(sp.identity(nv), np.ones((1, n)))]
    rhs = [np.ones(nv)]
    if admissible.mean is not None:
        rows.append(sp.kron(admissible.weights[None, :], sp.identity(n)).tocsr()[: n - 1])
        rhs.append(admissible.mean[: n - 1] * admissible.total_weight)

    lower = np.zeros((nv, n))
    upper = np.full((nv, n), np.inf)
    upper[admissible.solid, -1] = 0.0
    upper[admissible.void] = 0.0
    lower[admissible.void, -1] = upper[admissible.void, -1] = 1.0

    result = linprog(g.ravel(), A_eq=sp.vstack(rows, format="csr"), b_eq=np.concatenate(rhs),
                     bounds=np.column_stack([lower.ravel(), upper.ravel()]), method="highs")
    if not result.success:
        raise ConvergenceError(f"variational-inequality gap LP failed: {result.message}")
    return float(result.fun - np.sum(g * phi))
