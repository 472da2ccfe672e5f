"""
The `verify` suite: eigensolver accuracy, derivative Taylor tests, the repeated
eigenvalue semi-derivative, projection properties, the combined adjoint gradient
and eigenvalue/eigenvector continuity, all on small meshes built from a run config.
"""

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from core.compliance import CombinedProblem, LoadCase, solve_adjoint, solve_state
from core.eigensolver import apply_sign_convention, dense_eigen_oracle, smallest_eigenpairs
from core.exceptions import EigenvectorCrossingError, ToolkitError
from core.fem_assembly import assemble_mass, assemble_mass_dir, assemble_stiffness, assemble_stiffness_dir
from core.grid import BoundaryTag, DofMap, Mesh, build_dof_map, build_rect_mesh
from core.logger import get_logger
from core.objective import EigenProblem
from core.phasefield import AdmissibleSet
from core.sensitivity import eigenfunction_derivative, eigenvalue_derivative, semi_derivative_first
from models.config import RunConfig
from models.materials import CutoffParams, MaterialSet
from models.results import CheckResult
from services.runner import boxes_mask

logger = get_logger(__name__)

TAYLOR_STEPS = np.array([1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
LIPSCHITZ_STEPS = np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
SLOPE_RANGE = (1.9, 2.1)


@dataclass
class VerificationContext:
    config: RunConfig
    mats: MaterialSet
    cutoff: CutoffParams
    mesh: Mesh
    dofmap: DofMap
    rng: np.random.Generator

    @classmethod
    def from_config(cls, config: RunConfig, n: int = 8, seed: int | None = None) -> "VerificationContext":
        mesh = _config_mesh(config, n)
        mats = config.materials
        return cls(config=config, mats=mats, cutoff=CutoffParams.default_for(mats), mesh=mesh,
                   dofmap=build_dof_map(mesh, BoundaryTag.DIRICHLET_D),
                   rng=np.random.default_rng(config.optimizer.seed if seed is None else seed))

    def interior_phase(self, mesh: Mesh | None = None) -> np.ndarray:
        """Random nodal simplex vectors with every component at least 0.2/N."""
        mesh = mesh or self.mesh
        n = self.mats.n_materials
        floor = 0.2 / n
        return floor + (1.0 - n * floor) * self.rng.dirichlet(np.ones(n), size=mesh.n_vertices)

    def direction(self, scale: float = 1.0, mesh: Mesh | None = None) -> np.ndarray:
        mesh = mesh or self.mesh
        h = self.rng.standard_normal((mesh.n_vertices, self.mats.n_materials))
        return scale * h / np.abs(h).max()


def _config_mesh(config: RunConfig, n: int) -> Mesh:
    m = config.mesh
    return build_rect_mesh(n, n, m.lx, m.ly, m.sides, m.load_sides, m.diagonal)


def taylor_slope(steps: np.ndarray, remainders) -> float:
    remainders = np.asarray(remainders, dtype=float)
    if np.any(remainders <= 0.0):
        return float("nan")
    return float(np.polyfit(np.log(steps), np.log(remainders), 1)[0])


def _slope_ok(slope: float) -> bool:
    return SLOPE_RANGE[0] <= slope <= SLOPE_RANGE[1]


def _dense(ctx: VerificationContext, phi, mesh=None, dofmap=None, mats=None, cutoff=None):
    mesh, dofmap = mesh or ctx.mesh, dofmap or ctx.dofmap
    mats, cutoff = mats or ctx.mats, cutoff or ctx.cutoff
    K = assemble_stiffness(mesh, dofmap, phi, mats, cutoff)
    M = assemble_mass(mesh, dofmap, phi, mats, cutoff)
    return K, M, dense_eigen_oracle(K, M)


def _simple_mask(pairs) -> np.ndarray:
    return np.array([pairs.is_simple(i) for i in range(len(pairs))])


def _first_simple(pairs, limit: int = 4) -> int | None:
    return next((i for i in range(min(limit, len(pairs))) if pairs.is_simple(i)), None)


def check_eigensolver(ctx: VerificationContext) -> tuple[bool, str]:
    mesh = _config_mesh(ctx.config, 16)
    dofmap = build_dof_map(mesh, BoundaryTag.DIRICHLET_D)
    phi = ctx.interior_phase(mesh)
    K, M, oracle = _dense(ctx, phi, mesh, dofmap)
    pairs = smallest_eigenpairs(K, M, 6)
    rel = np.abs(pairs.lambdas - oracle.lambdas[:6]) / oracle.lambdas[:6]
    gram = pairs.vectors.T @ (M @ pairs.vectors)
    orth = np.abs(gram - np.eye(6)).max()
    return bool(rel.max() <= 1e-8 and orth <= 1e-8), f"max rel error {rel.max():.2e}, M-orthonormality {orth:.2e}"


def check_eigenvalue_derivative(ctx: VerificationContext, n_fields: int = 5, n_dirs: int = 5) -> tuple[bool, str]:
    slopes = []
    for _ in range(n_fields):
        phi = ctx.interior_phase()
        _, _, pairs = _dense(ctx, phi)
        index = _first_simple(pairs)
        if index is None:
            return False, "no simple eigenvalue among the first four"
        lam = pairs.lambdas[index]
        for _ in range(n_dirs):
            h = ctx.direction()
            dlam = eigenvalue_derivative(ctx.mesh, ctx.dofmap, phi, pairs, index, h, ctx.mats, ctx.cutoff)
            remainders = [abs(_dense(ctx, phi + t * h)[2].lambdas[index] - lam - t * dlam)
                          for t in TAYLOR_STEPS]
            slopes.append(taylor_slope(TAYLOR_STEPS, remainders))
    ok = all(_slope_ok(s) for s in slopes)
    return ok, f"slopes in [{np.nanmin(slopes):.3f}, {np.nanmax(slopes):.3f}]"


def check_eigenfunction_derivative(ctx: VerificationContext, n_fields: int = 5, n_dirs: int = 5) -> tuple[bool, str]:
    slopes, worst_constraint = [], 0.0
    for _ in range(n_fields):
        phi = ctx.interior_phase()
        K, M, pairs = _dense(ctx, phi)
        index = _first_simple(pairs)
        if index is None:
            return False, "no simple eigenvalue among the first four"
        lam, w = float(pairs.lambdas[index]), pairs.vectors[:, index]
        reference = pairs.head(index + 1)
        for _ in range(n_dirs):
            h = ctx.direction()
            dK = assemble_stiffness_dir(ctx.mesh, ctx.dofmap, phi, h, ctx.mats, ctx.cutoff)
            dM = assemble_mass_dir(ctx.mesh, ctx.dofmap, phi, h, ctx.mats, ctx.cutoff)
            dlam = float(w @ (dK @ w)) - lam * float(w @ (dM @ w))
            dw = eigenfunction_derivative(K, M, dK, dM, lam, w, dlam)
            kappa = -float(w @ (dM @ w))
            constraint = abs(float((M @ w) @ dw) - 0.5 * kappa) / max(1.0, abs(kappa))
            worst_constraint = max(worst_constraint, constraint)
            remainders = []
            for t in TAYLOR_STEPS:
                shifted = _dense(ctx, phi + t * h)[2].head(index + 1)
                fixed = apply_sign_convention(shifted, reference, M)
                remainders.append(np.linalg.norm(fixed.vectors[:, index] - w - t * dw))
            slopes.append(taylor_slope(TAYLOR_STEPS, remainders))
    ok = all(_slope_ok(s) for s in slopes) and worst_constraint <= 1e-10
    return ok, (f"slopes in [{np.nanmin(slopes):.3f}, {np.nanmax(slopes):.3f}], "
                f"normalization constraint {worst_constraint:.1e}")


def check_semi_derivative(ctx: VerificationContext) -> tuple[bool, str]:
    """Repeated λ₁ on a clamped square whose criss-cross mesh has the symmetry of the square."""
    n = ctx.mats.n_materials
    mats = ctx.mats.model_copy(update={"poisson": [0.2] * (n - 1), "void_poisson": 0.2})
    cutoff = CutoffParams.default_for(mats)
    clamped = {side: BoundaryTag.DIRICHLET_D for side in ("bottom", "right", "top", "left")}
    mesh = build_rect_mesh(8, 8, 1.0, 1.0, clamped, diagonal="alternating")
    dofmap = build_dof_map(mesh, BoundaryTag.DIRICHLET_D)
    phi = np.tile(ctx.config.constraints.mean, (mesh.n_vertices, 1))
    _, _, pairs = _dense(ctx, phi, mesh, dofmap, mats, cutoff)
    start, stop = pairs.group_of(0)
    if stop - start < 2:
        return False, "first eigenvalue is not repeated on the symmetric mesh"
    lam1 = float(pairs.lambdas[0])
    h = ctx.direction(0.1, mesh)
    semi = semi_derivative_first(mesh, dofmap, phi, pairs.vectors[:, start:stop], lam1, h, mats, cutoff)
    errors = []
    for t in (1e-3, 1e-4):
        shifted = _dense(ctx, phi + t * h, mesh, dofmap, mats, cutoff)[2].lambdas[0]
        errors.append(abs((shifted - lam1) / t - semi) / abs(lam1))
    return max(errors) <= 1e-3, f"multiplicity {stop - start}, normalized errors {', '.join(f'{e:.1e}' for e in errors)}"


def check_projection(ctx: VerificationContext, n_pairs: int = 1000) -> tuple[bool, str]:
    constraints = ctx.config.constraints
    admissible = AdmissibleSet.for_mesh(ctx.mesh, ctx.mats.n_materials, mean=constraints.mean,
                                        solid=boxes_mask(ctx.mesh, constraints.solid),
                                        void=boxes_mask(ctx.mesh, constraints.void))
    w = admissible.weights
    worst = {"idempotence": 0.0, "mean": 0.0, "simplex": 0.0, "fixed": 0.0, "expansion": 0.0}
    base = np.asarray(constraints.mean)
    for _ in range(n_pairs):
        a = base + ctx.rng.standard_normal((w.size, admissible.n_materials))
        b = base + ctx.rng.standard_normal((w.size, admissible.n_materials))
        pa, pb = admissible.project(a), admissible.project(b)
        worst["idempotence"] = max(worst["idempotence"], np.abs(admissible.project(pa) - pa).max())
        worst["mean"] = max(worst["mean"], np.abs(admissible.discrete_mean(pa) - base).max())
        worst["simplex"] = max(worst["simplex"], -pa.min(), np.abs(pa.sum(axis=1) - 1.0).max())
        worst["fixed"] = max(worst["fixed"], np.abs(pa[admissible.solid, -1]).max(initial=0.0),
                             np.abs(pa[admissible.void, -1] - 1.0).max(initial=0.0))
        dist_p = np.sqrt(w @ np.sum((pa - pb) ** 2, axis=1))
        dist = np.sqrt(w @ np.sum((a - b) ** 2, axis=1))
        worst["expansion"] = max(worst["expansion"], dist_p - dist)
    ok = (worst["idempotence"] <= 1e-12 and worst["mean"] <= 1e-10 and worst["simplex"] <= 1e-12
          and worst["fixed"] == 0.0 and worst["expansion"] <= 1e-10)
    return ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items())


def check_combined(ctx: VerificationContext, n_dirs: int = 5) -> tuple[bool, str]:
    """Synthetic downward body force and traction, zero target, ν = 1/2, α = β = 1."""
    mesh, nv = ctx.mesh, ctx.mesh.n_vertices
    dofmap_c = build_dof_map(mesh, BoundaryTag.DIRICHLET_C)
    down = np.tile([0.0, -1.0], (nv, 1))
    zero = np.zeros((nv, 2))

    def load(alpha, beta):
        return LoadCase(body_force=down, traction=down, target=zero, weight=np.ones(nv),
                        exponent=0.5, alpha=alpha, beta=beta)

    phi = ctx.interior_phase()
    u = solve_state(mesh, dofmap_c, phi, load(1.0, 0.0), ctx.mats, ctx.cutoff)
    p = solve_adjoint(mesh, dofmap_c, phi, u, load(1.0, 0.0), ctx.mats, ctx.cutoff)
    adjoint_gap = np.linalg.norm(p - u) / np.linalg.norm(u)

    eigen = EigenProblem(mesh, ctx.dofmap, ctx.config.objective, ctx.mats, ctx.cutoff, eigen_tol=1e-10)
    problem = CombinedProblem(eigen, dofmap_c, load(1.0, 1.0))
    evaluation = problem.evaluate(phi)
    g = problem.gradient(phi, evaluation)
    slopes = []
    for _ in range(n_dirs):
        h = ctx.direction()
        dI = float(np.sum(g * h))
        remainders = [abs(problem.evaluate(phi + t * h).value - evaluation.value - t * dI)
                      for t in TAYLOR_STEPS]
        slopes.append(taylor_slope(TAYLOR_STEPS, remainders))

    reduced = CombinedProblem(eigen, dofmap_c, load(0.0, 0.0))
    ev_eigen, ev_reduced = eigen.evaluate(phi), reduced.evaluate(phi)
    value_gap = abs(ev_eigen.value - ev_reduced.value) / (1.0 + abs(ev_eigen.value))
    g_eigen = eigen.gradient(phi, ev_eigen)
    grad_gap = np.abs(g_eigen - reduced.gradient(phi, ev_reduced)).max() / (1.0 + np.abs(g_eigen).max())

    ok = adjoint_gap <= 1e-10 and all(_slope_ok(s) for s in slopes) and max(value_gap, grad_gap) <= 1e-12
    return ok, (f"adjoint gap {adjoint_gap:.1e}, slopes in [{np.nanmin(slopes):.3f}, {np.nanmax(slopes):.3f}], "
                f"reduction gap {max(value_gap, grad_gap):.1e}")


def check_continuity(ctx: VerificationContext, count: int = 4) -> tuple[bool, str]:
    """λ₁..λ₄ along a segment between two admissible fields, and their sign-fixed eigenvectors."""
    phi, other = ctx.interior_phase(), ctx.interior_phase()
    h = other - phi
    _, M, pairs = _dense(ctx, phi)
    reference = pairs.head(count)
    ratios, distances = [], []
    for t in LIPSCHITZ_STEPS:
        shifted = _dense(ctx, phi + t * h)[2].head(count)
        ratios.append(np.abs(shifted.lambdas - reference.lambdas) / t)
        try:
            fixed = apply_sign_convention(shifted, reference, M)
        except EigenvectorCrossingError:
            distances.append(np.full(count, np.inf))
            continue
        diff = fixed.vectors - reference.vectors
        dist = np.sqrt(np.einsum("ij,ij->j", diff, M @ diff))
        distances.append(np.where(fixed.sign_fixed & _simple_mask(reference), dist, np.nan))
    ratios = np.array(ratios)
    lipschitz = 2.0 * ratios[:2].max()
    bounded = bool(np.all(ratios <= lipschitz))
    distances = np.array(distances)
    tracked = ~np.isnan(distances[-1])
    monotone = bool(np.all(np.diff(distances[:, tracked], axis=0) <= 1e-12))
    ok = bounded and monotone and tracked.any()
    return ok, f"fitted Lipschitz constant {lipschitz:.3g}, {int(tracked.sum())} eigenvectors tracked"


CHECKS: dict[str, Callable[[VerificationContext], tuple[bool, str]]] = {
    "eigensolver_vs_dense": check_eigensolver,
    "eigenvalue_derivative": check_eigenvalue_derivative,
    "eigenfunction_derivative": check_eigenfunction_derivative,
    "semi_derivative": check_semi_derivative,
    "projection": check_projection,
    "combined_gradient": check_combined,
    "continuity": check_continuity,
}


def run_verification(config: RunConfig, only: list[str] | None = None,
                     seed: int | None = None) -> list[CheckResult]:
    """Run the named checks (all by default); numerical errors count as failures."""
    ctx = VerificationContext.from_config(config, seed=seed)
    results = []
    for name, check in CHECKS.items():
        if only and name not in only:
            continue
        started = time.perf_counter()
        try:
            passed, detail = check(ctx)
        except ToolkitError as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        result = CheckResult(name=name, passed=bool(passed), detail=detail,
                             seconds=time.perf_counter() - started)
        (logger.info if result.passed else logger.error)("verify.check", name=name, passed=result.passed,
                                                            detail=detail)
        results.append(result)
    return results
