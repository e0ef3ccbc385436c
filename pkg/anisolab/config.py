"""
anisolab Configuration
Load environment variables and provide typed settings.
"""
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Laboratory settings loaded from environment variables (prefix ANISOLAB_)."""

    model_config = SettingsConfigDict(
        env_prefix="ANISOLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",  # Allow extra env vars in .env file
    )

    # Runtime
    log_level: str = "INFO"
    threads: int = 4

    # Gauge geometry
    wulff_directions: int = 10000
    polar_grid_directions: int = 20000

    # Field analysis
    level_count: int = 200
    weight_clamp_ratio: float = 0.1

    # Tolerance model: tolerance_used = C * h_max
    tolerance_c: float = 0.5
    wulff_tolerance_c: float = 0.5

    # Energy minimization
    solver_max_iterations: int = 5000
    solver_energy_rtol: float = 1e-12
    solver_gradient_tol: float = 1e-8
    solver_accept_tol: float = 1e-6
    solver_newton: bool = True
    newton_shift: float = 1e-10
    armijo_c: float = 1e-4
    armijo_rho: float = 0.5
    divergence_threshold: float = 1e12

    # Inverse iteration
    eigen_max_iterations: int = 300
    eigen_rtol: float = 1e-8

    # Radial space-form reduction
    radial_grid_points: int = 2001
    radial_tolerance: float = 1e-10
    reilly_tolerance: float = 1e-6

    # Reports
    float_digits: int = 12

    @property
    def worker_count(self) -> int:
        """Number of suite workers, never below one."""
        return max(1, self.threads)


settings = Settings()
