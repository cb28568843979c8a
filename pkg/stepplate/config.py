# config.py
import os
from pathlib import Path
from typing import Literal

from pydantic import PositiveFloat, PositiveInt, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

REPO_ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = Path(__file__).resolve().parent / "configs"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        # Let ENV_FILE override; otherwise read root .env
        env_file=os.getenv("ENV_FILE", REPO_ROOT / ".env"),
        env_file_encoding="utf-8",
        extra="ignore",  # <-- lets unknown env vars pass through
    )

    APP_ENV: Literal["dev", "prod"] = "dev"
    LOG_LEVEL: str = "INFO"

    # frequency sweep
    BETA_MIN: PositiveFloat = 0.05
    BETA_MAX: PositiveFloat = 120.0
    BETA_STEP: PositiveFloat = 0.05
    REFINE_LEVELS: int = 3
    BISECTION_RTOL: PositiveFloat = 1e-10
    BRANCH_GUARD: PositiveFloat = 1e-8
    BRANCH_NUDGE: PositiveFloat = 1e-6
    ROOT_SINGULAR_RTOL: PositiveFloat = 1e-4
    CONTINUITY_VARIANT: Literal["twisting", "hoop"] = "twisting"

    # section integrals
    QUAD_RTOL: PositiveFloat = 1e-12

    # finite-element oracle
    ORACLE_ELEMENTS: PositiveInt = 200
    ORACLE_DENSE_MAX_DOF: PositiveInt = 800

    # reports
    VALIDATE_TOLERANCE: PositiveFloat = 0.01
    TABLE1_TOLERANCE: PositiveFloat = 1e-3
    PEAK_TOLERANCE: PositiveFloat = 0.1
    WORKERS: PositiveInt = 1

    @model_validator(mode="after")
    def finalize(self):
        problems = []
        if self.BETA_MIN >= self.BETA_MAX:
            problems.append("BETA_MIN must be below BETA_MAX")
        if self.BETA_STEP >= self.BETA_MAX - self.BETA_MIN:
            problems.append("BETA_STEP must be smaller than the sweep range")
        if self.REFINE_LEVELS < 0:
            problems.append("REFINE_LEVELS must be non-negative")
        if self.BRANCH_NUDGE <= self.BISECTION_RTOL:
            problems.append("BRANCH_NUDGE must exceed BISECTION_RTOL")
        if problems:
            raise ValueError(f"Invalid solver settings: {'; '.join(problems)}")
        return self


settings = Settings()
