"""
Numerical and runtime settings
"""
from functools import lru_cache
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    """Settings from environment variables (or a local .env file)"""

    # Runtime
    OUTPUT_DIR: str = Field(default="out")
    DEFAULT_JOBS: int = Field(default=1)

    # ==========================================
    # ODE integration
    # ==========================================
    ODE_TOL: float = Field(default=1e-10)
    ODE_METHOD: str = Field(default="RK45")  # embedded Dormand-Prince 4(5)

    # ==========================================
    # Quadrature on Q and on the period cell
    # ==========================================
    QUAD_ORDER: int = Field(default=16)
    QUAD_CELLS_PER_UNIT: int = Field(default=4)
    QUADRATURE_TOL: float = Field(default=1e-12)

    # ==========================================
    # Band edge scan
    # ==========================================
    SCAN_POINTS_PER_PI: int = Field(default=24)
    SCAN_MAX_REFINEMENTS: int = Field(default=5)
    EDGE_ROOT_TOL: float = Field(default=1e-14)
    EDGE_ZERO_TOL: float = Field(default=1e-10)
    DEGENERACY_RTOL: float = Field(default=1e-8)
    DEGENERACY_D_TOL: float = Field(default=1e-9)

    # ==========================================
    # Green operators and the k-equation
    # ==========================================
    ON_SPECTRUM_TOL: float = Field(default=1e-8)
    DEGENERATE_POINT_GUARD: float = Field(default=1e-6)
    NEUMANN_TOL: float = Field(default=1e-12)
    NEUMANN_MAX_TERMS: int = Field(default=200)
    SINGULAR_COND: float = Field(default=1e12)
    DENSE_SOLVE_MAX_NODES: int = Field(default=4096)
    K_TOL: float = Field(default=1e-12)
    K_MAX_ITER: int = Field(default=100)
    K_DAMPING: float = Field(default=0.5)

    # ==========================================
    # Direct finite-difference oracle
    # ==========================================
    ORACLE_DENSE_MAX: int = Field(default=6000)
    ORACLE_RESIDUAL_TOL: float = Field(default=1e-8)
    ORACLE_POINTS_PER_SCALE: int = Field(default=16)
    ORACLE_EIGS_COUNT: int = Field(default=6)

    # Logging
    LOG_LEVEL: str = Field(default="INFO")
    LOG_FORMAT: str = Field(default="console")  # console | json

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @property
    def exist_threshold(self) -> float:
        """Criterion band around zero treated as indeterminate"""
        return 1e3 * self.QUADRATURE_TOL


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()


# Convenience accessor for settings
settings = get_settings()
