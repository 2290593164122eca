from pydantic_settings import BaseSettings
from functools import lru_cache
from dotenv import load_dotenv
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent
env_path = BASE_DIR / ".env"

load_dotenv(dotenv_path=env_path, override=False)

class Settings(BaseSettings):
    # App
    APP_NAME: str = "skspline"
    LOG_LEVEL: str = "INFO"

    # Parallelism (0 = let joblib pick)
    SKSPLINE_THREADS: int = 0

    # Tolerances
    LATTICE_TOL: float = 1e-10
    DERIVED_TOL: float = 1e-8

    # Truncation budget: (2L+1)^d frequencies at most
    MAX_FREQUENCIES: int = 262144
    # One-dimensional scalar series (kernel_eval, rho/sigma) may run longer
    SERIES_MAX_TERMS: int = 4194304
    SHELL_COUNT_RADIUS: int = 50
    # Ewald boxes grow in steps of one Gaussian width, up to this many
    EWALD_MAX_FACTOR: int = 40

    # Dense oracle / CLI guards
    DENSE_SOLVE_MAX_N: int = 4096
    CLI_MAX_DIM: int = 4
    DEFAULT_SEED: int = 0

    # Output
    RESULTS_DIR: str = "results"

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore"
    }

    def max_radius(self, d: int) -> int:
        """Largest box radius L with (2L+1)^d inside the frequency budget."""
        side = int(round(self.MAX_FREQUENCIES ** (1.0 / d)))
        while side ** d > self.MAX_FREQUENCIES:
            side -= 1
        return max((side - 1) // 2, 1)

    def n_jobs(self) -> int:
        return self.SKSPLINE_THREADS if self.SKSPLINE_THREADS > 0 else -1

@lru_cache()
def get_settings():
    return Settings()

settings = get_settings()
