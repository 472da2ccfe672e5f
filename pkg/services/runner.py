from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.compliance import CombinedProblem, LoadCase
from core.exceptions import ConfigError, LineSearchError
from core.grid import BoundaryTag, DofMap, Mesh, build_dof_map, build_rect_mesh
from core.logger import get_logger
from core.objective import DesignProblem, EigenProblem
from core.optimizer import projected_gradient_solve
from core.phasefield import AdmissibleSet
from models.config import Box, RunConfig
from models.materials import CutoffParams
from models.results import IterationRecord, OptResult
from services.io import phase_fields, write_history, write_summary, write_vtk

logger = get_logger(__name__)


@dataclass
class RunSetup:
    """Everything a run needs, built once from a RunConfig."""
    config: RunConfig
    mesh: Mesh
    dofmap: DofMap
    cutoff: CutoffParams
    admissible: AdmissibleSet
    problem: DesignProblem


@dataclass
class RunOutcome:
    result: OptResult
    directory: Path
    summary: dict


def boxes_mask(mesh: Mesh, boxes: list[Box]) -> np.ndarray:
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    for box in boxes:
        mask |= mesh.box_mask(box.x0, box.x1, box.y0, box.y1)
    return mask


def build_setup(config: RunConfig, combined: bool = False) -> RunSetup:
    """
    Build mesh, dof maps, admissible set and objective from a validated configuration.

    Args:
        config: The run configuration
        combined: Build the compliance-augmented problem instead of the pure eigenvalue one

    Returns:
        RunSetup ready for projected_gradient_solve
    """
    m = config.mesh
    mesh = build_rect_mesh(m.nx, m.ny, m.lx, m.ly, m.sides, m.load_sides, m.diagonal)
    dofmap = build_dof_map(mesh, BoundaryTag.DIRICHLET_D)
    mats = config.materials
    cutoff = CutoffParams.default_for(mats)
    admissible = AdmissibleSet.for_mesh(
        mesh, mats.n_materials, mean=config.constraints.mean,
        solid=boxes_mask(mesh, config.constraints.solid),
        void=boxes_mask(mesh, config.constraints.void))
    problem: DesignProblem = EigenProblem(mesh, dofmap, config.objective, mats, cutoff,
                                          eigen_tol=config.optimizer.eigen_tol)
    if combined:
        if config.loads is None:
            raise ConfigError("optimize-combined needs a loads section", ["loads: missing"])
        load = LoadCase.from_config(mesh, config.loads)
        problem = CombinedProblem(problem, build_dof_map(mesh, BoundaryTag.DIRICHLET_C), load)
    return RunSetup(config=config, mesh=mesh, dofmap=dofmap, cutoff=cutoff,
                    admissible=admissible, problem=problem)


def _final_fields(setup: RunSetup, phi: np.ndarray) -> tuple[dict, dict]:
    fields = phase_fields(phi)
    evaluation = setup.problem.evaluate(phi)
    if evaluation.pairs is not None:
        mode = setup.dofmap.expand(evaluation.pairs.vectors[:, 0])
        fields["mode_1"] = mode.reshape(-1, 2)
    if evaluation.state is not None:
        fields["displacement"] = np.asarray(evaluation.state).reshape(-1, 2)
    decomposition = {
        "objective": evaluation.value,
        "psi": evaluation.psi,
        "gl_energy": evaluation.gl_energy,
        "lambdas": [float(v) for v in evaluation.lambdas],
    }
    if evaluation.compliance is not None:
        decomposition["compliance"] = evaluation.compliance
        decomposition["deviation"] = evaluation.deviation
    return fields, decomposition


def _summary(setup: RunSetup, result: OptResult, decomposition: dict) -> dict:
    return {
        "termination_reason": result.termination_reason.value,
        "message": result.message,
        "iterations": result.iterations,
        "final": decomposition,
        "vi_residual": result.vi_residual,
        "discrete_mean": [float(v) for v in setup.admissible.discrete_mean(result.final_phi)],
    }


def run_optimization(config: RunConfig, combined: bool = False,
                     output_dir: str | Path | None = None) -> RunOutcome:
    """
    Run the projected-gradient optimization described by `config` and write its artifacts.

    Writes history.csv, final.vtk, summary.yaml and, when output.vtk_every > 0,
    iter_XXXXX.vtk snapshots into the output directory.
    """
    setup = build_setup(config, combined)
    directory = Path(output_dir or config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    every = config.output.vtk_every
    opts = config.optimizer

    def snapshot(iteration: int, phi: np.ndarray, record: IterationRecord) -> None:
        if every and iteration % every == 0:
            write_vtk(directory / f"iter_{iteration:05d}.vtk", setup.mesh, phase_fields(phi))

    phi0 = setup.admissible.initial_field(noise=opts.initial_noise, seed=opts.seed)
    logger.info("run.start", combined=combined, vertices=setup.mesh.n_vertices,
                free_dofs=setup.dofmap.n_free, output=str(directory))
    try:
        result = projected_gradient_solve(setup.problem, phi0, setup.admissible, opts, snapshot)
    except LineSearchError as e:
        if e.result is not None:
            write_history(directory / "history.csv", e.result)
        raise

    write_history(directory / "history.csv", result)
    fields, decomposition = _final_fields(setup, result.final_phi)
    write_vtk(directory / "final.vtk", setup.mesh, fields)
    summary = _summary(setup, result, decomposition)
    write_summary(directory / "summary.yaml", summary)
    logger.info("run.done", reason=result.termination_reason.value, objective=decomposition["objective"])
    return RunOutcome(result=result, directory=directory, summary=summary)
