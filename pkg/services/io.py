"""
Reading run configurations and writing run artifacts (YAML, legacy VTK, CSV).
"""

from pathlib import Path
from typing import Any, Mapping

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from core.exceptions import ConfigError, InvalidInputError
from core.grid import Mesh
from models.config import RunConfig
from models.results import OptResult

VTK_TRIANGLE = 5


def _key_path(loc: tuple) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_config(path: str | Path) -> RunConfig:
    """Load and validate a YAML run configuration; every problem is reported with its key path."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"{path} is not valid YAML", [str(e)]) from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping of sections")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        problems = [f"{_key_path(err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigError(f"invalid configuration {path}", problems) from e


def write_config(path: str | Path, config: RunConfig) -> None:
    Path(path).write_text(
        yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False), encoding="utf-8")


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def write_vtk(path: str | Path, mesh: Mesh, fields: Mapping[str, np.ndarray],
              title: str = "phase-field design") -> None:
    """
    Legacy ASCII VTK unstructured grid with nodal fields.

    (nv,) arrays become SCALARS blocks, (nv, 2) or (nv, 3) arrays VECTORS blocks
    (2D vectors padded with z = 0). Numbers use 9 significant digits.
    """
    nv = mesh.n_vertices
    blocks = []
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        if values.shape[0] != nv:
            raise InvalidInputError(f"field {name!r} has {values.shape[0]} values for {nv} points")
        label = str(name).replace(" ", "_")
        if values.ndim == 1 or values.shape[1:] == (1,):
            blocks.append(f"SCALARS {label} double 1")
            blocks.append("LOOKUP_TABLE default")
            blocks.extend(_fmt(v) for v in values.ravel())
        elif values.ndim == 2 and values.shape[1] in (2, 3):
            padded = np.zeros((nv, 3))
            padded[:, : values.shape[1]] = values
            blocks.append(f"VECTORS {label} double")
            blocks.extend(" ".join(_fmt(c) for c in row) for row in padded)
        else:
            raise InvalidInputError(f"field {name!r} of shape {values.shape} is neither scalar nor vector")

    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines.extend(f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices)
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    lines.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles)
    lines.append(f"CELL_TYPES {nt}")
    lines.extend([str(VTK_TRIANGLE)] * nt)
    if blocks:
        lines.append(f"POINT_DATA {nv}")
        lines.extend(blocks)
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def phase_fields(phi: np.ndarray) -> dict[str, np.ndarray]:
    """One named scalar field per phase; the last is the void."""
    n = phi.shape[1]
    return {(f"phi_{i + 1}" if i < n - 1 else "phi_void"): phi[:, i] for i in range(n)}


def history_frame(result: OptResult) -> pd.DataFrame:
    lambda_cols = [f"lambda_{j + 1}" for j in range(result.n_targets)]
    columns = ["iter", "J", "psi", "gl_energy", *lambda_cols, "step", "vi_residual"]
    rows = [[r.iteration, r.objective, r.psi, r.gl_energy, *r.lambdas, r.step, r.vi_residual]
            for r in result.records]
    return pd.DataFrame(rows, columns=columns)


def write_history(path: str | Path, result: OptResult) -> None:
    """CSV with header iter,J,psi,gl_energy,lambda_1..lambda_l,step,vi_residual."""
    history_frame(result).to_csv(path, index=False, float_format="%.12g", lineterminator="\n")


def write_summary(path: str | Path, summary: Mapping[str, Any]) -> None:
    Path(path).write_text(yaml.safe_dump(dict(summary), sort_keys=False), encoding="utf-8")
