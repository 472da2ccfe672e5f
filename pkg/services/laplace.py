"""
Mesh validation on the scalar Neumann Laplacian of the unit square, whose
eigenvalues are π²(m² + n²).
"""

from typing import NamedTuple

import numpy as np

from core.eigensolver import smallest_eigenpairs
from core.fem_assembly import assemble_scalar_laplace
from core.grid import BoundaryTag, build_rect_mesh
from core.logger import get_logger

logger = get_logger(__name__)

_NEUMANN = {side: BoundaryTag.NEUMANN_0 for side in ("bottom", "right", "top", "left")}


class LaplaceRow(NamedTuple):
    modes: tuple[int, int]
    exact: float
    observed: float
    rel_error: float


def analytic_spectrum(count: int) -> list[tuple[tuple[int, int], float]]:
    """The `count` smallest nonzero π²(m² + n²) with their (m, n), ascending."""
    bound = int(np.ceil(np.sqrt(count))) + 2
    pairs = [((m, n), np.pi ** 2 * (m * m + n * n))
             for m in range(bound) for n in range(bound) if m or n]
    pairs.sort(key=lambda item: (item[1], item[0]))
    return pairs[:count]


def laplace_validate(nx: int, count: int = 8) -> list[LaplaceRow]:
    """Discrete vs analytic Neumann eigenvalues on an nx-by-nx mesh (the zero mode is skipped)."""
    mesh = build_rect_mesh(nx, nx, 1.0, 1.0, _NEUMANN)
    K, M = assemble_scalar_laplace(mesh, 1.0)
    pairs = smallest_eigenpairs(K, M, count + 1, sigma=-1.0)
    observed = pairs.lambdas[1:]
    rows = [LaplaceRow(modes, exact, float(obs), abs(obs - exact) / exact)
            for (modes, exact), obs in zip(analytic_spectrum(count), observed)]
    logger.info("laplace.validated", nx=nx, worst_rel_error=max(r.rel_error for r in rows))
    return rows


def convergence_ratio(coarse: list[LaplaceRow], fine: list[LaplaceRow]) -> float:
    """Ratio of the worst relative errors; about 4 for second-order convergence under halving h."""
    return max(r.rel_error for r in coarse) / max(r.rel_error for r in fine)
