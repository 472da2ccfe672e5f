"""
Phase-field design variable: Ginzburg–Landau energy and projection onto the
admissible set (Gibbs simplex, mean-value constraint, fixed regions).

A phase field is a nodal array of shape (n_vertices, N); component N is void.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.optimize import brentq

from core.exceptions import ConvergenceError, InfeasibleConstraintError, InvalidInputError
from core.fem_assembly import assemble_scalar_laplace
from core.grid import Mesh
from core.logger import get_logger
from core.material_model import bulk_potential, bulk_potential_deriv

logger = get_logger(__name__)

PhaseField = np.ndarray


def ginzburg_landau(mesh: Mesh, phi: PhaseField, gamma: float, eps: float) -> float:
    """γE^ε(φ) = γ∫(ε/2)|∇φ|² + (γ/ε)∫ψ0(φ), gradient term exact for P1, ψ0 by nodal quadrature."""
    S = _laplace_stiffness(mesh)
    gradient_term = 0.5 * eps * float(np.sum(phi * (S @ phi)))
    potential_term = float(mesh.vertex_weights @ bulk_potential(phi)) / eps
    return gamma * (gradient_term + potential_term)


def ginzburg_landau_grad(mesh: Mesh, phi: PhaseField, gamma: float, eps: float) -> np.ndarray:
    S = _laplace_stiffness(mesh)
    return gamma * eps * (S @ phi) + (gamma / eps) * mesh.vertex_weights[:, None] * bulk_potential_deriv(phi)


@lru_cache(maxsize=8)
def _laplace_stiffness(mesh: Mesh):
    stiffness, _ = assemble_scalar_laplace(mesh, 1.0)
    return stiffness


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean projection onto {x ≥ 0, Σx = 1} (sort-based)."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    u = -np.sort(-y, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    k = np.arange(1, n + 1)
    cond = u - css / k > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    tau = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(y - tau, 0.0)


@dataclass(frozen=True, eq=False)
class AdmissibleSet:
    """
    G^m ∩ U_c on the mesh: nodewise Gibbs simplex, discrete mean m (optional), φ^N = 0
    on solid nodes (S₀) and φ^N = 1 on void nodes (S₁). Means use lumped vertex weights.
    """
    weights: np.ndarray
    n_materials: int
    mean: np.ndarray | None = None
    solid: np.ndarray | None = None
    void: np.ndarray | None = None

    @classmethod
    def for_mesh(cls, mesh: Mesh, n_materials: int, mean=None, solid=None, void=None) -> "AdmissibleSet":
        nv = mesh.n_vertices
        solid = np.zeros(nv, dtype=bool) if solid is None else np.asarray(solid, dtype=bool)
        void = np.zeros(nv, dtype=bool) if void is None else np.asarray(void, dtype=bool)
        if np.any(solid & void):
            raise InfeasibleConstraintError("a vertex is marked both solid (S0) and void (S1)")
        if mean is not None:
            mean = np.asarray(mean, dtype=float)
            if mean.shape != (n_materials,):
                raise InvalidInputError(f"mean needs {n_materials} components, got {mean.shape}")
            if np.any(mean <= 0.0) or np.any(mean >= 1.0) or abs(mean.sum() - 1.0) > 1e-12:
                raise InvalidInputError(f"mean {mean.tolist()} is not in the open simplex")
        admissible = cls(weights=mesh.vertex_weights, n_materials=n_materials,
                         mean=mean, solid=solid, void=void)
        admissible._check_feasible()
        return admissible

    @cached_property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def discrete_mean(self, phi: PhaseField) -> np.ndarray:
        return self.weights @ phi / self.total_weight

    def _check_feasible(self) -> None:
        if self.mean is None:
            return
        void_share = self.weights[self.void].sum() / self.total_weight
        solid_share = self.weights[self.solid].sum() / self.total_weight
        m_void = self.mean[-1]
        if m_void < void_share - 1e-12:
            raise InfeasibleConstraintError(
                f"void region alone holds {void_share:.6g} of the domain, mean asks for {m_void:.6g}")
        if m_void > 1.0 - solid_share + 1e-12:
            raise InfeasibleConstraintError(
                f"solid region leaves at most {1.0 - solid_share:.6g} for void, mean asks for {m_void:.6g}")

    def _project_shifted(self, y: np.ndarray, c: np.ndarray) -> np.ndarray:
        out = np.empty_like(y)
        free = ~(self.solid | self.void)
        out[free] = project_simplex(y[free] + c)
        if self.solid.any():
            out[self.solid, :-1] = project_simplex(y[self.solid, :-1] + c[:-1])
            out[self.solid, -1] = 0.0
        if self.void.any():
            out[self.void] = 0.0
            out[self.void, -1] = 1.0
        return out

    def project(self, field: np.ndarray, tol: float = 1e-12, max_iter: int = 200) -> PhaseField:
        """
        L²-closest admissible field (lumped inner product): nodewise simplex projection
        of field + c with the offset c chosen so the discrete mean equals m.
        """
        y = np.asarray(field, dtype=float)
        if y.shape != (self.weights.size, self.n_materials):
            raise InvalidInputError(
                f"field must have shape ({self.weights.size}, {self.n_materials}), got {y.shape}")
        zero = np.zeros(self.n_materials)
        if self.mean is None:
            return self._project_shifted(y, zero)
        target = self.mean * self.total_weight

        def residual(c):
            return self.weights @ self._project_shifted(y, c) - target

        if self.n_materials == 2:
            # the mean of component 1 is nondecreasing in the offset t along (1, -1)
            bound = np.abs(y).max() + 2.0
            f = lambda t: residual(np.array([t, -t]))[0]
            t = brentq(f, -bound, bound, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
            return self._project_shifted(y, np.array([t, -t]))
        return self._project_newton(y, tol, max_iter)

    def _dual_merit(self, y: np.ndarray, c: np.ndarray) -> tuple[float, np.ndarray, PhaseField]:
        """
        Convex dual merit Φ(c) = Σ w (z·φ − |φ|²/2) − c·W m with z = y + c and φ the
        shifted nodewise projection. ∇Φ(c) is the mean residual Σ w φ − W m.
        """
        phi = self._project_shifted(y, c)
        z = y + c
        target = self.mean * self.total_weight
        value = float(self.weights @ (np.sum(z * phi, axis=1) - 0.5 * np.sum(phi * phi, axis=1)))
        return value - float(c @ target), self.weights @ phi - target, phi

    def _newton_matrix(self, phi: PhaseField) -> np.ndarray:
        """Generalized Jacobian of the mean residual: active-pattern blocks diag(a) − aaᵀ/|a|."""
        n = self.n_materials
        H = np.zeros((n, n))
        free = ~(self.solid | self.void)
        for mask, last in ((free, n), (self.solid, n - 1)):
            rows = phi[mask, :last] > 0.0
            w = self.weights[mask]
            for pattern in np.unique(rows, axis=0):
                sel = np.all(rows == pattern, axis=1)
                a = np.zeros(n)
                a[:last] = pattern
                k = a.sum()
                if k == 0:
                    continue
                H += w[sel].sum() * (np.diag(a) - np.outer(a, a) / k)
        return H

    def _project_newton(self, y, tol, max_iter) -> PhaseField:
        """
        Semismooth Newton on the dual of the mean-constrained projection, with Armijo
        backtracking on the dual merit. Directions that fail to descend are replaced by
        the gradient step −∇Φ/W, for which W bounds the Lipschitz constant of ∇Φ.
        """
        n = self.n_materials
        ones = np.ones(n) / np.sqrt(n)
        P = np.eye(n) - np.outer(ones, ones)
        scale = self.total_weight
        c = np.zeros(n)
        value, r, phi = self._dual_merit(y, c)
        for _ in range(max_iter):
            if np.abs(r).max() <= tol * scale:
                return phi
            d, *_ = np.linalg.lstsq(P @ self._newton_matrix(phi) @ P, -(P @ r), rcond=None)
            d = P @ d
            slope = float(r @ d)
            if slope >= -1e-8 * np.linalg.norm(r) * np.linalg.norm(d):
                d = -(P @ r) / scale
                slope = float(r @ d)
            # Φ differences below this are rounding noise
            slack = 1e-13 * (1.0 + abs(value))
            step = 1.0
            while True:
                trial_value, trial_r, trial_phi = self._dual_merit(y, c + step * d)
                if (trial_value <= value + 1e-4 * step * slope + slack
                        or np.abs(trial_r).max() <= tol * scale):
                    break
                step *= 0.5
                if step < 1e-12:
                    raise ConvergenceError(
                        f"mean-constrained projection: no descent step (residual {np.abs(r).max():.3g})")
            c = c + step * d
            value, r, phi = trial_value, trial_r, trial_phi
        if np.abs(r).max() <= tol * scale:
            return phi
        raise ConvergenceError("mean-constrained projection did not converge")

    def contains(self, phi: PhaseField, tol: float = 1e-10) -> bool:
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.weights.size, self.n_materials):
            return False
        if phi.min() < -tol or np.abs(phi.sum(axis=1) - 1.0).max() > tol:
            return False
        if self.mean is not None and np.abs(self.discrete_mean(phi) - self.mean).max() > tol:
            return False
        if np.abs(phi[self.solid, -1]).max(initial=0.0) > tol:
            return False
        if np.abs(phi[self.void, -1] - 1.0).max(initial=0.0) > tol:
            return False
        return True

    def initial_field(self, noise: float = 0.0, seed: int = 0) -> PhaseField:
        """Projection of the uniform field m (barycenter without a mean), optionally perturbed."""
        base = self.mean if self.mean is not None else np.full(self.n_materials, 1.0 / self.n_materials)
        field = np.tile(base, (self.weights.size, 1))
        if noise > 0.0:
            field = field + noise * np.random.default_rng(seed).standard_normal(field.shape)
        return self.project(field)

    def random_point(self, rng: np.random.Generator, spread: float = 1.0) -> PhaseField:
        field = rng.uniform(0.0, spread, size=(self.weights.size, self.n_materials))
        return self.project(field)


def project_admissible(field: np.ndarray, admissible: AdmissibleSet) -> PhaseField:
    """Projection of a raw nodal field onto the admissible set."""
    return admissible.project(field)
