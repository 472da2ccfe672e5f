from enum import Enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.grid import BoundaryTag, Side
from models.materials import MaterialSet


class PsiKind(str, Enum):
    WEIGHTED_SUM = "weighted_sum"    # Σ c_j λ_{i_j}
    NEG_MIN_FIRST = "neg_min_first"  # −λ₁
    INVERSE_SUM = "inverse_sum"      # Σ c_j / λ_{i_j}


class ObjectiveSpec(BaseModel):
    """Ψ(λ_{i_1}, ..., λ_{i_l}) + γE^ε(φ); an empty index list means Ψ ≡ 0."""
    model_config = ConfigDict(frozen=True)

    indices: List[int] = Field(default_factory=lambda: [1], description="1-based eigenvalue targets")
    psi_kind: PsiKind = PsiKind.WEIGHTED_SUM
    weights: Optional[List[float]] = Field(None, description="c_j, defaults to ones")
    gamma: float = Field(1e-3, ge=0.0, description="interface weight γ")
    epsilon: float = Field(..., gt=0.0, description="interface thickness ε")
    lower_bound: Optional[float] = Field(None, ge=0.0, description="c_Ψ with J ≥ −c_Ψ")

    @model_validator(mode="after")
    def _check(self) -> "ObjectiveSpec":
        if any(i < 1 for i in self.indices):
            raise ValueError("eigenvalue indices are 1-based")
        if sorted(set(self.indices)) != list(self.indices):
            raise ValueError("eigenvalue indices must be strictly increasing")
        if self.weights is not None:
            if len(self.weights) != len(self.indices):
                raise ValueError("weights needs one entry per eigenvalue index")
            if any(c < 0.0 for c in self.weights):
                raise ValueError("weights must be nonnegative so that Ψ is bounded below")
        if self.psi_kind is PsiKind.NEG_MIN_FIRST and list(self.indices) != [1]:
            raise ValueError("neg_min_first targets exactly the first eigenvalue (indices: [1])")
        return self

    @property
    def coefficients(self) -> List[float]:
        return list(self.weights) if self.weights is not None else [1.0] * len(self.indices)

    @property
    def bound(self) -> float:
        """c_Ψ; without an explicit value Ψ ≥ 0 is assumed except for −λ₁, which is left unchecked."""
        if self.lower_bound is not None:
            return self.lower_bound
        return float("inf") if self.psi_kind is PsiKind.NEG_MIN_FIRST else 0.0


class MeshConfig(BaseModel):
    nx: int = Field(..., ge=1)
    ny: int = Field(..., ge=1)
    lx: float = Field(1.0, gt=0.0)
    ly: float = Field(1.0, gt=0.0)
    sides: Dict[Side, BoundaryTag] = Field(..., description="Γ_D / Γ_0 tag per side")
    load_sides: Optional[Dict[Side, BoundaryTag]] = Field(None, description="Γ_C / Γ_g tag per side")
    diagonal: Literal["forward", "alternating"] = "forward"

    @field_validator("sides")
    @classmethod
    def _eigen_tags(cls, value):
        if set(value) != set(Side):
            raise ValueError("every side (bottom, right, top, left) needs a tag")
        if any(t not in (BoundaryTag.DIRICHLET_D, BoundaryTag.NEUMANN_0) for t in value.values()):
            raise ValueError("sides take DIRICHLET_D or NEUMANN_0")
        return value

    @field_validator("load_sides")
    @classmethod
    def _load_tags(cls, value):
        if value is None:
            return value
        if set(value) != set(Side):
            raise ValueError("every side (bottom, right, top, left) needs a tag")
        if any(t not in (BoundaryTag.DIRICHLET_C, BoundaryTag.NEUMANN_G) for t in value.values()):
            raise ValueError("load_sides take DIRICHLET_C or NEUMANN_G")
        return value


class Box(BaseModel):
    """Axis-aligned box [x0, x1] x [y0, y1]."""
    x0: float
    x1: float
    y0: float
    y1: float

    @model_validator(mode="after")
    def _ordered(self) -> "Box":
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError("box corners must satisfy x0 <= x1 and y0 <= y1")
        return self


class LoadsConfig(BaseModel):
    """Constant body force, traction on Γ_g and target displacement; c is the indicator of weight_box."""
    body_force: List[float] = Field(default_factory=lambda: [0.0, 0.0], min_length=2, max_length=2)
    traction: List[float] = Field(default_factory=lambda: [0.0, 0.0], min_length=2, max_length=2)
    target: List[float] = Field(default_factory=lambda: [0.0, 0.0], min_length=2, max_length=2)
    weight_box: Optional[Box] = None
    exponent: float = Field(1.0, gt=0.0, le=1.0, description="ν")
    alpha: float = Field(1.0, ge=0.0)
    beta: float = Field(0.0, ge=0.0)


class OptimizerOptions(BaseModel):
    max_iter: int = Field(100, ge=0)
    armijo_sigma: float = Field(1e-4, gt=0.0, lt=1.0)
    backtrack_beta: float = Field(0.5, gt=0.0, lt=1.0)
    step0: float = Field(1.0, gt=0.0)
    conv_tol: float = Field(1e-6, gt=0.0)
    seed: int = 0
    initial_noise: float = Field(0.0, ge=0.0)
    eigen_tol: float = Field(1e-8, gt=0.0)
    track_vi: bool = True


class ConstraintsConfig(BaseModel):
    mean: List[float] = Field(..., description="m, on the open simplex")
    solid: List[Box] = Field(default_factory=list, description="S₀ boxes (φ^N = 0)")
    void: List[Box] = Field(default_factory=list, description="S₁ boxes (φ^N = 1)")

    @field_validator("mean")
    @classmethod
    def _on_simplex(cls, value):
        if any(not 0.0 < v < 1.0 for v in value) or abs(sum(value) - 1.0) > 1e-12:
            raise ValueError("mean not on simplex")
        return value


class OutputConfig(BaseModel):
    directory: str = "results"
    vtk_every: int = Field(0, ge=0, description="snapshot cadence, 0 disables snapshots")


class RunConfig(BaseModel):
    mesh: MeshConfig
    materials: MaterialSet
    objective: ObjectiveSpec
    loads: Optional[LoadsConfig] = None
    optimizer: OptimizerOptions = Field(default_factory=OptimizerOptions)
    constraints: ConstraintsConfig
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="before")
    @classmethod
    def _shared_epsilon(cls, data):
        if isinstance(data, dict):
            eps = (data.get("materials") or {}).get("interface_eps")
            objective = data.get("objective")
            if isinstance(objective, dict) and eps is not None:
                if objective.get("epsilon") is None:
                    data = {**data, "objective": {**objective, "epsilon": eps}}
                elif objective["epsilon"] != eps:
                    raise ValueError("objective.epsilon must equal materials.interface_eps")
        return data

    @model_validator(mode="after")
    def _consistency(self) -> "RunConfig":
        n = self.materials.n_materials
        if len(self.constraints.mean) != n:
            raise ValueError(f"constraints.mean needs {n} entries")
        boxes = list(self.constraints.solid) + list(self.constraints.void)
        if self.loads is not None and self.loads.weight_box is not None:
            boxes.append(self.loads.weight_box)
        for box in boxes:
            if box.x0 < 0.0 or box.y0 < 0.0 or box.x1 > self.mesh.lx or box.y1 > self.mesh.ly:
                raise ValueError(f"box {box.model_dump()} is not inside the domain")
        return self
