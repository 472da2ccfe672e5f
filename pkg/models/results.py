from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class TerminationReason(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    EIGENVALUE_DEGENERATED = "eigenvalue_degenerated"


class IterationRecord(BaseModel):
    iteration: int
    objective: float
    psi: float
    gl_energy: float
    lambdas: List[float]
    step: float
    vi_residual: float = float("nan")
    compliance: Optional[float] = None
    deviation: Optional[float] = None


class OptResult(BaseModel):
    """Outcome of a projected-gradient run; the objective history is non-increasing."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    final_phi: np.ndarray
    records: List[IterationRecord]
    termination_reason: TerminationReason
    n_targets: int = 0
    message: str = ""

    @property
    def objective_history(self) -> List[float]:
        return [r.objective for r in self.records]

    @property
    def eigenvalue_history(self) -> List[List[float]]:
        return [r.lambdas for r in self.records]

    @property
    def step_sizes(self) -> List[float]:
        return [r.step for r in self.records]

    @property
    def vi_residual(self) -> float:
        return self.records[-1].vi_residual if self.records else float("nan")

    @property
    def iterations(self) -> int:
        return max(len(self.records) - 1, 0)


class CheckResult(BaseModel):
    """One entry of the verification suite."""
    name: str
    passed: bool
    detail: str = ""
    seconds: float = Field(0.0, ge=0.0)
