"""
Configuration settings for the cascade popularity pipeline
"""
import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.models.errors import ConfigError

# Load environment variables from .env file
load_dotenv()

ONE_HOUR_S = 3600
THIRTY_DAYS_S = 30 * 24 * 3600


class DensityPairs(str, Enum):
    """How the possible links among adopters are counted"""
    ORDERED = "ordered"
    UNORDERED = "unordered"


class OrphanPolicy(str, Enum):
    """What to do with a retweet whose parent never adopted earlier"""
    REPARENT = "reparent"
    DROP = "drop"


class InputFormat(str, Enum):
    """Input file layouts understood by the ingestion layer"""
    CANONICAL_TSV = "canonical_tsv"
    ADAPTER = "adapter"


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    app_name: str = Field(default="Cascade Popularity Predictor")
    log_level: str = Field(default="INFO")
    environment: str = Field(default="dev")
    workers: int = Field(default=1, ge=1, description="Threads used for per-cascade feature extraction")

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=False, extra="ignore")


class PipelineConfig(BaseSettings):
    """Resolved configuration of one pipeline run.

    Values come from (highest priority first) explicit keyword arguments
    (CLI flags), environment variables, the dotenv-style run config file
    passed as ``_env_file``, and finally the defaults below.
    """

    # Paths
    graph_path: Optional[Path] = None
    cascades_path: Optional[Path] = None
    features_path: Optional[Path] = None
    output_dir: Path = Field(default=Path("out"))

    # Observation window
    t_i: int = Field(default=ONE_HOUR_S, ge=0, description="Indicating time, seconds after post")
    t_r: int = Field(default=THIRTY_DAYS_S, gt=0, description="Reference time, seconds after post")

    # Features
    min_early: int = Field(default=1, ge=1)
    density_pairs: DensityPairs = DensityPairs.ORDERED
    exclude_root: bool = False
    density_floor: float = Field(default=1e-6)

    # Fit / evaluation
    train_frac: float = Field(default=0.75)
    seed: int = 42
    variants: str = Field(default="baseline,with_density,with_depth", description="Comma-separated model variants")
    clamp_to_early: bool = False
    n_bins: int = Field(default=10)

    # Ingestion
    orphan_policy: OrphanPolicy = OrphanPolicy.REPARENT
    graph_format: InputFormat = InputFormat.CANONICAL_TSV
    graph_delimiter: Optional[str] = "\t"
    graph_follower_column: int = Field(default=0, ge=0)
    graph_followee_column: int = Field(default=1, ge=0)
    graph_skip_header: bool = False
    cascade_format: InputFormat = InputFormat.CANONICAL_TSV
    cascade_delimiter: Optional[str] = "\t"
    cascade_tweet_column: int = Field(default=0, ge=0)
    cascade_user_column: int = Field(default=1, ge=0)
    cascade_parent_column: int = Field(default=2, ge=0)
    cascade_time_column: int = Field(default=3, ge=0)
    cascade_root_marker: str = "-"
    cascade_time_format: str = Field(default="unix", description="'unix' or a strftime pattern")
    cascade_skip_header: bool = False

    model_config = SettingsConfigDict(env_prefix="CASCADE_", case_sensitive=False, extra="ignore")

    @field_validator("variants")
    @classmethod
    def _known_variants(cls, value: str) -> str:
        names = [v.strip() for v in value.split(",") if v.strip()]
        known = {"baseline", "with_density", "with_depth"}
        unknown = [v for v in names if v not in known]
        if unknown:
            raise ValueError(f"unknown model variant(s): {', '.join(unknown)}")
        if not names:
            raise ValueError("at least one model variant is required")
        return ",".join(names)

    @property
    def variant_names(self) -> List[str]:
        return self.variants.split(",")

    @model_validator(mode="after")
    def _check_ranges(self) -> "PipelineConfig":
        if self.t_i >= self.t_r:
            raise ValueError(f"t_i ({self.t_i}) must be smaller than t_r ({self.t_r})")
        if not 0.0 < self.train_frac < 1.0:
            raise ValueError(f"train_frac must lie in (0, 1), got {self.train_frac}")
        if self.density_floor <= 0.0:
            raise ValueError(f"density_floor must be positive, got {self.density_floor}")
        if self.n_bins < 2:
            raise ValueError(f"n_bins must be at least 2, got {self.n_bins}")
        return self

    def feature_settings(self) -> dict:
        """The fields that change feature values; these define the fingerprint"""
        return {
            "t_i": self.t_i,
            "t_r": self.t_r,
            "min_early": self.min_early,
            "density_pairs": self.density_pairs.value,
            "exclude_root": self.exclude_root,
            "density_floor": self.density_floor,
        }

    def fingerprint(self) -> str:
        payload = json.dumps(self.feature_settings(), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# Global settings instance
settings = Settings()


def load_pipeline_config(config_file: Optional[Path] = None, **overrides) -> PipelineConfig:
    """Resolve a PipelineConfig from an optional run config file plus overrides.

    ``None`` overrides are ignored so unset CLI flags fall through to the file.
    """
    explicit = {k: v for k, v in overrides.items() if v is not None}
    if config_file is not None and not Path(config_file).exists():
        raise ConfigError(f"config file not found: {config_file}")
    try:
        return PipelineConfig(_env_file=config_file, **explicit)
    except ValueError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
