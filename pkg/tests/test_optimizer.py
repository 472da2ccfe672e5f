import numpy as np
import pytest

from core.config import settings
from core.exceptions import InvalidInputError, LineSearchError
from core.grid import BoundaryTag, build_dof_map, build_rect_mesh
from core.objective import EigenProblem, Evaluation, vi_residual
from core.optimizer import projected_gradient_solve
from core.phasefield import AdmissibleSet
from models.config import ObjectiveSpec, OptimizerOptions
from models.results import TerminationReason
from tests.conftest import CLAMPED


def _spec(**kwargs):
    return ObjectiveSpec(epsilon=0.1, **kwargs)


@pytest.fixture
def admissible(cantilever):
    return AdmissibleSet.for_mesh(cantilever, 2, mean=[0.5, 0.5])


def test_descent_on_first_eigenvalue(cantilever, cantilever_dofs, mats2, cutoff2, admissible):
    problem = EigenProblem(cantilever, cantilever_dofs, _spec(psi_kind="neg_min_first", gamma=1e-3),
                           mats2, cutoff2)
    phi0 = admissible.initial_field(noise=0.02, seed=3)
    seen = []
    result = projected_gradient_solve(problem, phi0, admissible, OptimizerOptions(max_iter=4),
                                      callback=lambda i, phi, record: seen.append(i))
    history = result.objective_history
    assert np.all(np.diff(history) <= 1e-12)
    assert history[-1] < history[0]
    assert admissible.contains(result.final_phi)
    assert seen == [r.iteration for r in result.records]
    assert result.termination_reason in (TerminationReason.MAX_ITER, TerminationReason.CONVERGED)
    assert all(len(r.lambdas) == 1 for r in result.records)
    assert all(r.vi_residual <= 1e-9 for r in result.records)


def test_stationary_start_converges_immediately(cantilever, cantilever_dofs, mats2, cutoff2, admissible):
    # uniform fields are stationary for the interface energy under the mean constraint
    problem = EigenProblem(cantilever, cantilever_dofs, _spec(indices=[], gamma=1.0), mats2, cutoff2)
    result = projected_gradient_solve(problem, admissible.initial_field(), admissible)
    assert result.termination_reason is TerminationReason.CONVERGED
    assert result.iterations == 0
    assert result.vi_residual == pytest.approx(0.0, abs=1e-7)


def test_degenerate_target_stops_the_run(symmetric_square, mats_double):
    dofmap = build_dof_map(symmetric_square, BoundaryTag.DIRICHLET_D)
    admissible = AdmissibleSet.for_mesh(symmetric_square, 2, mean=[0.5, 0.5])
    problem = EigenProblem(symmetric_square, dofmap, _spec(indices=[1]), mats_double)
    result = projected_gradient_solve(problem, admissible.initial_field(), admissible)
    assert result.termination_reason is TerminationReason.EIGENVALUE_DEGENERATED
    assert len(result.records) == 1
    assert "cluster" in result.message


def test_inadmissible_start(cantilever, cantilever_dofs, mats2, cutoff2, admissible):
    problem = EigenProblem(cantilever, cantilever_dofs, _spec(), mats2, cutoff2)
    with pytest.raises(InvalidInputError):
        projected_gradient_solve(problem, np.full((cantilever.n_vertices, 2), 0.7), admissible)


class AscentProblem:
    """Reports the negated gradient of Σ w φ₁², so no step is ever accepted."""
    n_targets = 0

    def __init__(self, weights):
        self.weights = weights

    def evaluate(self, phi):
        value = float(self.weights @ phi[:, 0] ** 2)
        return Evaluation(value=value, psi=0.0, gl_energy=value, lambdas=np.empty(0))

    def gradient(self, phi, evaluation):
        g = np.zeros_like(phi)
        g[:, 0] = -2.0 * self.weights * phi[:, 0]
        return g

    def directional_derivative(self, phi, evaluation, h):
        return float(np.sum(self.gradient(phi, evaluation) * h))


def test_line_search_failure_keeps_partial_history(admissible, monkeypatch):
    monkeypatch.setattr(settings, "max_backtracks", 5)
    phi0 = admissible.initial_field(noise=0.1, seed=1)
    with pytest.raises(LineSearchError) as info:
        projected_gradient_solve(AscentProblem(admissible.weights), phi0, admissible,
                                 OptimizerOptions(track_vi=False))
    partial = info.value.result
    assert partial is not None
    assert len(partial.records) == 1
    assert partial.message == "line search failed"


def test_small_step_decrease_matches_first_order(cantilever, cantilever_dofs, mats2, cutoff2, admissible):
    problem = EigenProblem(cantilever, cantilever_dofs, _spec(psi_kind="neg_min_first", gamma=1e-3),
                           mats2, cutoff2, eigen_tol=1e-12)
    phi = admissible.initial_field(noise=0.05, seed=3)
    evaluation = problem.evaluate(phi)
    g = problem.gradient(phi, evaluation)
    direction = g / admissible.weights[:, None]
    step = 1e-4 / np.abs(direction).max()
    trial = admissible.project(phi - step * direction)
    d = trial - phi
    # no bound is active, so the step is s times the projected gradient
    predicted = float(admissible.weights @ np.sum(d * d, axis=1)) / step
    assert -float(np.sum(g * d)) == pytest.approx(predicted, rel=1e-6)
    decrease = evaluation.value - problem.evaluate(trial).value
    assert decrease == pytest.approx(predicted, rel=0.2)


def test_interface_energy_alone_relaxes_to_the_mean(cantilever, cantilever_dofs, mats2, admissible):
    # ε² times the first Neumann eigenvalue exceeds 1, so the uniform field is the unique minimizer
    problem = EigenProblem(cantilever, cantilever_dofs, ObjectiveSpec(indices=[], gamma=10.0, epsilon=2.0),
                           mats2)
    phi0 = admissible.initial_field(noise=0.1, seed=5)
    assert np.abs(phi0 - 0.5).max() > 0.05
    result = projected_gradient_solve(problem, phi0, admissible,
                                      OptimizerOptions(max_iter=3000, track_vi=False))
    assert result.termination_reason is TerminationReason.CONVERGED
    energies = np.array([r.gl_energy for r in result.records])
    assert np.all(np.diff(energies) <= 1e-12 * (1.0 + np.abs(energies[:-1])))
    assert np.abs(result.final_phi - 0.5).max() < 1e-3


@pytest.mark.slow
def test_clamped_square_first_eigenvalue_run(mats2, cutoff2):
    mesh = build_rect_mesh(32, 32, 1.0, 1.0, CLAMPED)
    dofmap = build_dof_map(mesh, BoundaryTag.DIRICHLET_D)
    admissible = AdmissibleSet.for_mesh(mesh, 2, mean=[0.4, 0.6])
    problem = EigenProblem(mesh, dofmap, _spec(psi_kind="neg_min_first", gamma=1e-3), mats2, cutoff2)
    phi0 = admissible.initial_field(noise=0.01, seed=0)
    result = projected_gradient_solve(problem, phi0, admissible,
                                      OptimizerOptions(max_iter=100, track_vi=False))

    history = result.objective_history
    assert np.all(np.diff(history) <= 1e-12 * (1.0 + np.abs(history[:-1])))
    assert result.records[-1].lambdas[0] > result.records[0].lambdas[0]

    phi = result.final_phi
    assert admissible.contains(phi)
    evaluation = problem.evaluate(phi)
    rng = np.random.default_rng(7)
    points = [admissible.random_point(rng) for _ in range(100)]
    worst = vi_residual(problem, phi, evaluation, points, admissible)
    assert worst >= -1e-6 * (1.0 + abs(evaluation.value))
