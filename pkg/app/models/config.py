import logging
import os
from typing import Any, Dict, List, Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.models.state import InterArrivalLaw, PrecisionPolicy
from app.utils.errors import ConfigError

logger = logging.getLogger(__name__)

LAW_NAMES = ("special", "mixture-powerlaw", "mixture-lacunary")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Settings(BaseModel):
    """Environment-driven defaults."""
    base_bits: int = 256
    per_degree_bits: float = 1.5
    quadrature_tol: float = 1e-30
    cache_dir: str = ".pinning_cache"
    output_dir: str = "output"
    log_level: str = "INFO"
    workers: int = 1

    @field_validator("log_level")
    @classmethod
    def _check_level(cls, value: str) -> str:
        value = value.upper()
        if value not in LOG_LEVELS:
            raise ValueError(f"unknown log level {value!r}")
        return value

    @field_validator("workers")
    @classmethod
    def _check_workers(cls, value: int) -> int:
        if value < 1:
            raise ValueError("workers must be >= 1")
        return value

    def policy(self) -> PrecisionPolicy:
        return PrecisionPolicy(base_bits=self.base_bits, per_degree_bits=self.per_degree_bits,
                               quadrature_tol=self.quadrature_tol)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump()


ENVIRONMENT = {
    "base_bits": "PINNING_BASE_BITS",
    "per_degree_bits": "PINNING_PER_DEGREE_BITS",
    "quadrature_tol": "PINNING_QUADRATURE_TOL",
    "cache_dir": "PINNING_CACHE_DIR",
    "output_dir": "PINNING_OUTPUT_DIR",
    "log_level": "PINNING_LOG_LEVEL",
    "workers": "PINNING_WORKERS",
}


def load_settings(**overrides: Any) -> Settings:
    """Settings from .env and the environment; explicit overrides win over both."""
    load_dotenv()
    values: Dict[str, Any] = {}
    for field, variable in ENVIRONMENT.items():
        raw = os.environ.get(variable)
        if raw is not None and raw != "":
            values[field] = raw
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        settings = Settings(**values)
        settings.policy()
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        raise ConfigError(f"invalid configuration: {e}") from e
    return settings


class RunConfig(BaseModel):
    """Validated parameters of one CLI command."""
    model_config = ConfigDict(extra="forbid")

    command: str
    alpha: float = 0.5
    N: Optional[int] = None
    Ns: List[int] = Field(default_factory=list)
    law: str = "special"
    p: float = 0.5
    n0: int = 3
    n_max: Optional[int] = None
    k_min: int = 40
    k_max: int = 120
    points: List[Any] = Field(default_factory=list)
    resolution: int = 512
    coords: Literal["h", "w"] = "h"
    svg: Optional[str] = None
    format: Literal["csv", "json", "svg"] = "json"
    profile: Literal["quick", "full"] = "quick"
    output_dir: str = "output"

    @field_validator("alpha")
    @classmethod
    def _check_alpha(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError(f"alpha must lie in (0,1), got {value}")
        return value

    @field_validator("p")
    @classmethod
    def _check_p(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError(f"p must lie in (0,1), got {value}")
        return value

    @field_validator("law")
    @classmethod
    def _check_law(cls, value: str) -> str:
        if value not in LAW_NAMES:
            raise ValueError(f"unknown law {value!r}; expected one of {', '.join(LAW_NAMES)}")
        return value

    @field_validator("resolution")
    @classmethod
    def _check_resolution(cls, value: int) -> int:
        if value < 8:
            raise ValueError("resolution must be >= 8")
        return value

    @model_validator(mode="after")
    def _check_sizes(self) -> "RunConfig":
        sizes = list(self.Ns) + ([self.N] if self.N is not None else [])
        if any(n < 1 for n in sizes):
            raise ValueError("N must be >= 1")
        if self.command == "zeros" and any(n < 2 for n in sizes):
            raise ValueError("zero finding needs N >= 2")
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ValueError(f"invalid k range [{self.k_min}, {self.k_max}]")
        if self.n_max is not None and self.n_max < max(self.n0, 2):
            raise ValueError("n_max must be >= n0")
        return self

    def sizes(self) -> List[int]:
        """N-list of the command, single N last."""
        sizes = list(self.Ns)
        if self.N is not None and self.N not in sizes:
            sizes.append(self.N)
        return sizes

    def inter_arrival_law(self) -> InterArrivalLaw:
        return InterArrivalLaw(kind=self.law, alpha=self.alpha)


def build_run_config(command: str, **params: Any) -> RunConfig:
    try:
        return RunConfig(command=command, **params)
    except ValidationError as e:
        logger.error(f"Invalid {command} parameters: {e}")
        raise ConfigError(f"invalid {command} parameters: {e}") from e
