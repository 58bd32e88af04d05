"""Application configuration settings."""
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Laboratory defaults with environment variable support."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="VRLAB_",
        case_sensitive=False,
        extra="ignore",
    )

    app_name: str = "vrlab"

    log_level: str = "INFO"
    log_format: str = "text"

    # lattice sizing
    max_steps: int = 12
    node_budget: int = 1_000_000
    history_node_budget: int = 2 ** 19
    path_budget: int = 2 ** 20

    # index-process search
    bracket_half_width: float = 1.0
    bracket_max_doublings: int = 20
    tol_l: float = 1e-10

    # Picard iteration
    tol_fp_scale: float = 1e-9
    max_iter: int = 200
    y0_policy: str = "boundary"
    strict: bool = True

    # theorem checks
    flat_off_tol: float = 1e-8
    order_tol: float = 1e-8
    oracle_max_steps: int = 4
    probe_count: int = 9


settings = Settings()
