# Process-level settings using pydantic-settings for validation and type safety
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

VERSION = "1.0.0"


class Settings(BaseSettings):
    """Toolkit settings, overridable through PFTOPO_* environment variables or a .env file."""

    # Logging
    log_level: str = Field("INFO", description="Minimum log level")
    log_json: bool = Field(False, description="Render log events as JSON lines")

    # Eigensolver
    eigen_tol: float = Field(1e-8, gt=0.0,
                             description="Relative residual tolerance for eigenpairs")
    cluster_tol: float = Field(1e-6, gt=0.0,
                               description="Relative gap below which eigenvalues form one cluster")
    dense_oracle_max_dim: int = Field(3000, gt=0,
                                      description="Largest dimension accepted by the dense oracle")
    eigen_max_iter: int = Field(200, gt=0,
                                description="Refinement sweeps before giving up on eigenpairs")
    sign_overlap_min: float = Field(0.1, gt=0.0, lt=1.0,
                                    description="Smallest |overlap| accepted when fixing eigenvector signs")

    # Optimizer
    max_backtracks: int = Field(50, gt=0, description="Armijo backtracks before line-search failure")

    model_config = SettingsConfigDict(
        env_prefix="PFTOPO_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


# Create global settings instance
settings = Settings()
