"""
Projected-gradient descent on the admissible phase-field set with Armijo backtracking.
"""

from typing import Callable

import numpy as np

from core.config import settings
from core.exceptions import DegenerateEigenvalueError, InvalidInputError, LineSearchError
from core.logger import get_logger
from core.objective import DesignProblem, Evaluation, vi_gap
from core.phasefield import AdmissibleSet, PhaseField
from models.config import OptimizerOptions
from models.results import IterationRecord, OptResult, TerminationReason

logger = get_logger(__name__)

IterationCallback = Callable[[int, PhaseField, IterationRecord], None]


def _record(iteration: int, evaluation: Evaluation, step: float, gap: float) -> IterationRecord:
    return IterationRecord(
        iteration=iteration,
        objective=evaluation.value,
        psi=evaluation.psi,
        gl_energy=evaluation.gl_energy,
        lambdas=[float(v) for v in evaluation.lambdas],
        step=step,
        vi_residual=gap,
        compliance=evaluation.compliance,
        deviation=evaluation.deviation,
    )


def projected_gradient_solve(problem: DesignProblem, phi0: PhaseField, admissible: AdmissibleSet,
                             opts: OptimizerOptions | None = None,
                             callback: IterationCallback | None = None) -> OptResult:
    """
    Minimize problem.evaluate over the admissible set.

    Each iteration takes φ⁺ = P(φ − s ∇J), with ∇J the lumped-L² gradient, and accepts
    it once J(φ⁺) ≤ J(φ) − σ‖φ⁺ − φ‖²/s, shrinking s by β otherwise (norms are lumped
    L²). An accepted first trial lets the next iteration start from s/β, capped by
    step0. The run stops when ‖φ⁺ − φ‖/s < conv_tol, after max_iter iterations, or
    when a target eigenvalue stops being simple and has no one-sided fallback.
    """
    opts = opts or OptimizerOptions()
    phi = np.asarray(phi0, dtype=float)
    if not admissible.contains(phi):
        raise InvalidInputError("initial phase field is not admissible")

    evaluation = problem.evaluate(phi)
    records: list[IterationRecord] = []
    step, last_step = opts.step0, 0.0
    reason, message = TerminationReason.MAX_ITER, ""

    for iteration in range(opts.max_iter + 1):
        try:
            g = problem.gradient(phi, evaluation)
        except DegenerateEigenvalueError as e:
            records.append(_record(iteration, evaluation, last_step, float("nan")))
            reason, message = TerminationReason.EIGENVALUE_DEGENERATED, str(e)
            logger.warning("optimizer.degenerate", iteration=iteration, cluster=e.cluster)
            break

        gap = vi_gap(g, phi, admissible) if opts.track_vi else float("nan")
        record = _record(iteration, evaluation, last_step, gap)
        records.append(record)
        logger.info("optimizer.iteration", iteration=iteration, objective=record.objective,
                    lambdas=record.lambdas, step=last_step, vi_gap=gap)
        if callback is not None:
            callback(iteration, phi, record)
        if iteration == opts.max_iter:
            break

        direction = g / admissible.weights[:, None]
        converged = accepted = False
        for backtrack in range(settings.max_backtracks):
            trial = admissible.project(phi - step * direction)
            d = trial - phi
            d_norm2 = float(admissible.weights @ np.sum(d * d, axis=1))
            if np.sqrt(d_norm2) / step < opts.conv_tol:
                converged = True
                break
            trial_eval = problem.evaluate(trial)
            if trial_eval.value <= evaluation.value - opts.armijo_sigma * d_norm2 / step:
                accepted = True
                break
            step *= opts.backtrack_beta

        if converged:
            reason = TerminationReason.CONVERGED
            break
        if not accepted:
            partial = OptResult(final_phi=phi, records=records, termination_reason=reason,
                                n_targets=problem.n_targets, message="line search failed")
            raise LineSearchError(
                f"no Armijo step after {settings.max_backtracks} backtracks at iteration {iteration}",
                result=partial)

        phi, evaluation, last_step = trial, trial_eval, step
        if backtrack == 0:
            step = min(opts.step0, step / opts.backtrack_beta)

    logger.info("optimizer.done", reason=reason.value, iterations=len(records) - 1,
                objective=records[-1].objective)
    return OptResult(final_phi=phi, records=records, termination_reason=reason,
                     n_targets=problem.n_targets, message=message)
