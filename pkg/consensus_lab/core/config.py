"""
Process-level settings.

Read from the environment (prefix CONSENSUS_LAB_) or a local .env file. Experiment
parameters live in the YAML experiment config (see consensus_lab.harness.config); these
settings only carry defaults that the CLI and the harness fall back to.
"""
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="CONSENSUS_LAB_", env_file=".env", extra="ignore")

    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "runs"
    # Global communication budget shared by every algorithm
    ROUND_CAP: int = 5000
    INNER_ITERATION_CAP: int = 2000
    WORKERS: int = 1
    PLOTS: bool = False
    SENTRY_DSN: str | None = None
    METRICS_PORT: int | None = None


settings = Settings()
