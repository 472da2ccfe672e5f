from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class MaterialSet(BaseModel):
    """
    Per-material densities and isotropic moduli. The last material is void; its
    density and stiffness are weakened by ε² (interface_eps squared).
    """
    model_config = ConfigDict(frozen=True)

    n_materials: int = Field(..., ge=2, description="N, material count including void")
    densities: List[float] = Field(..., description="ϱ_1..ϱ_{N-1}")
    void_density_base: float = Field(..., gt=0.0, description="ϱ̃_N before ε² scaling")
    young: List[float] = Field(..., description="E_1..E_{N-1}")
    poisson: List[float] = Field(..., description="ν_1..ν_{N-1}")
    void_young_base: float = Field(..., gt=0.0, description="Ẽ_N before ε² scaling")
    void_poisson: float = Field(0.3, gt=0.0, lt=0.5)
    interface_eps: float = Field(..., gt=0.0, description="ε")

    @model_validator(mode="after")
    def _check_lengths(self) -> "MaterialSet":
        n = self.n_materials - 1
        for name in ("densities", "young", "poisson"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} needs {n} entries (one per non-void material)")
        if any(r <= 0.0 for r in self.densities):
            raise ValueError("densities must be positive")
        if any(e <= 0.0 for e in self.young):
            raise ValueError("young moduli must be positive")
        if any(not 0.0 < nu < 0.5 for nu in self.poisson):
            raise ValueError("poisson ratios must lie in (0, 0.5)")
        return self

    @property
    def scaled_densities(self) -> np.ndarray:
        """ϱ_1..ϱ_{N-1}, ε²ϱ̃_N."""
        eps2 = self.interface_eps ** 2
        return np.array([*self.densities, eps2 * self.void_density_base])

    @property
    def lame(self) -> np.ndarray:
        """(N, 2) plane-strain Lamé pairs (λ_i, μ_i); the void row is ε²-scaled."""
        young = np.array([*self.young, self.interface_eps ** 2 * self.void_young_base])
        nu = np.array([*self.poisson, self.void_poisson])
        lam = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        mu = young / (2.0 * (1.0 + nu))
        return np.column_stack([lam, mu])

    @property
    def coercivity(self) -> np.ndarray:
        """Per-material θ̃_i = 2μ_i, the smallest eigenvalue of the isotropic tensor on symmetric matrices."""
        return 2.0 * self.lame[:, 1]


class CutoffParams(BaseModel):
    """Cut-off σ_δ parameters; the quadratic blends have half-width δ/2."""
    model_config = ConfigDict(frozen=True)

    delta: float = Field(..., gt=0.0)

    @property
    def blend_width(self) -> float:
        return 0.5 * self.delta

    @classmethod
    def default_for(cls, mats: MaterialSet) -> "CutoffParams":
        """δ = min ϱ / (2 N max ϱ), which keeps ρ ≥ min ϱ / 2 on the hyperplane Σφ = 1."""
        rho = mats.scaled_densities
        return cls(delta=float(rho.min() / (2.0 * rho.max() * mats.n_materials)))
