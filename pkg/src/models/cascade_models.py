"""
Data models for retweet cascades, features, fitted models and reports
"""
import math
from enum import Enum
from typing import Annotated, Dict, FrozenSet, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

NodeId = Annotated[int, Field(ge=0, description="Dense internal user index")]


class RetweetEvent(BaseModel):
    """One forwarding step of a cascade"""
    model_config = ConfigDict(frozen=True)

    user: NodeId
    parent_user: NodeId = Field(..., description="User whose copy was forwarded")
    offset_s: int = Field(..., ge=0, description="Seconds since the root post")


class Cascade(BaseModel):
    """A tweet and its time-ordered forwards"""
    model_config = ConfigDict(frozen=True)

    tweet_id: str = Field(..., description="Opaque tweet identifier")
    root: NodeId = Field(..., description="Author of the tweet")
    post_time: int = Field(default=0, description="Absolute post time, unix seconds")
    events: Tuple[RetweetEvent, ...] = Field(default_factory=tuple)

    @field_validator("events")
    @classmethod
    def _sorted_by_offset(cls, events: Tuple[RetweetEvent, ...]) -> Tuple[RetweetEvent, ...]:
        for before, after in zip(events, events[1:]):
            if after.offset_s < before.offset_s:
                raise ValueError("events must be sorted by offset_s")
        return events

    @property
    def self_retweets(self) -> int:
        return sum(1 for e in self.events if e.user == self.root)

    @property
    def max_offset(self) -> int:
        return self.events[-1].offset_s if self.events else 0


class CascadePrefix(BaseModel):
    """A cascade restricted to the events at or before an indicating time"""
    model_config = ConfigDict(frozen=True)

    cascade: Cascade
    t_i: float = Field(..., ge=0, description="Indicating time in seconds; may be infinite")
    adopters: FrozenSet[int] = Field(..., description="Root plus every user with an event at offset <= t_i")
    forest: Dict[int, int] = Field(default_factory=dict, description="Adopter -> parent, root excluded")
    event_count: int = Field(default=0, description="Events with offset <= t_i")
    reparented: int = Field(default=0, description="Prefix events whose parent had not adopted yet")

    @property
    def root(self) -> int:
        return self.cascade.root


class IngestStats(BaseModel):
    """Per-file ingestion counters reported in the data-quality log"""
    lines: int = 0
    comment_lines: int = 0
    cascades: int = 0
    events: int = 0
    dropped_lines: int = 0
    repaired_parents: int = 0
    dropped_orphans: int = 0
    clamped_events: int = 0
    missing_roots: int = 0
    duplicate_roots: int = 0
    self_retweets: int = 0
    unknown_users: int = 0


class FeatureRow(BaseModel):
    """Regression inputs and targets of one tweet"""
    model_config = ConfigDict(frozen=True)

    tweet_id: str
    n_adopters: int = Field(..., ge=1)
    early_pop: int = Field(..., ge=0, description="p(t_i)")
    final_pop: int = Field(..., ge=0, description="p(t_r)")
    density: Optional[float] = Field(None, description="rho(t_i); None when fewer than two adopters")
    depth: int = Field(..., ge=0, description="d(t_i)")
    excluded_reason: Optional[str] = None
    ln_early: Optional[float] = None
    ln_density: Optional[float] = None
    ln_final: Optional[float] = None

    @model_validator(mode="after")
    def _check_invariants(self) -> "FeatureRow":
        if self.density is not None and not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density {self.density} outside [0, 1]")
        if self.depth > self.n_adopters - 1:
            raise ValueError(f"depth {self.depth} exceeds n_adopters - 1 = {self.n_adopters - 1}")
        if self.final_pop < self.early_pop:
            raise ValueError(f"final_pop {self.final_pop} < early_pop {self.early_pop}")
        return self

    @property
    def included(self) -> bool:
        return self.excluded_reason is None

    @classmethod
    def build(
        cls,
        tweet_id: str,
        n_adopters: int,
        early_pop: int,
        final_pop: int,
        density: Optional[float],
        depth: int,
        excluded_reason: Optional[str],
        density_floor: float,
    ) -> "FeatureRow":
        """Create a row and fill the log columns of included rows"""
        ln_early = ln_density = ln_final = None
        if excluded_reason is None:
            ln_early = math.log(early_pop)
            ln_final = math.log(final_pop)
            if density is not None:
                ln_density = math.log(density if density > 0.0 else density_floor)
        return cls(
            tweet_id=tweet_id,
            n_adopters=n_adopters,
            early_pop=early_pop,
            final_pop=final_pop,
            density=density,
            depth=depth,
            excluded_reason=excluded_reason,
            ln_early=ln_early,
            ln_density=ln_density,
            ln_final=ln_final,
        )


class ModelVariant(str, Enum):
    """The three log-linear popularity predictors"""
    BASELINE = "baseline"
    WITH_DENSITY = "with_density"
    WITH_DEPTH = "with_depth"

    @property
    def columns(self) -> Tuple[str, ...]:
        """Design-matrix column names, intercept last"""
        return {
            ModelVariant.BASELINE: ("ln_early", "intercept"),
            ModelVariant.WITH_DENSITY: ("ln_early", "ln_density", "intercept"),
            ModelVariant.WITH_DEPTH: ("ln_early", "depth", "intercept"),
        }[self]

    @property
    def arity(self) -> int:
        return len(self.columns)


class ModelCoefficients(BaseModel):
    """Fitted coefficients of one model variant"""
    model_config = ConfigDict(frozen=True)

    variant: ModelVariant
    coeffs: Tuple[float, ...]
    n_train: int = Field(..., ge=0)
    fingerprint: Optional[str] = Field(None, description="Feature config the model was trained under")

    @model_validator(mode="after")
    def _check_coeffs(self) -> "ModelCoefficients":
        if len(self.coeffs) != self.variant.arity:
            raise ValueError(f"{self.variant.value} needs {self.variant.arity} coefficients, got {len(self.coeffs)}")
        if not all(math.isfinite(c) for c in self.coeffs):
            raise ValueError(f"non-finite coefficient in {self.coeffs}")
        return self


class EvalReport(BaseModel):
    """Test-set errors of one model, in ln-popularity space"""
    variant: ModelVariant
    rmse: float = Field(..., ge=0.0)
    mae: float = Field(..., ge=0.0)
    n_test: int = Field(..., gt=0)
    split_seed: int
    n_train: Optional[int] = None
    coeffs: Tuple[float, ...] = Field(default_factory=tuple)

    @model_validator(mode="after")
    def _rmse_dominates_mae(self) -> "EvalReport":
        if self.rmse < self.mae - 1e-12 * max(1.0, self.mae):
            raise ValueError(f"rmse {self.rmse} < mae {self.mae}")
        return self


class BinAxis(str, Enum):
    DENSITY = "density"
    DEPTH = "depth"


class Bin(BaseModel):
    bin_lo: float
    bin_hi: float
    mean_final_pop: Optional[float] = None
    count: int = Field(default=0, ge=0)


class BinSummary(BaseModel):
    """Mean final popularity per bin of a structural feature"""
    axis: BinAxis
    bins: List[Bin] = Field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(b.count for b in self.bins)


class SynthConfig(BaseModel):
    """Parameters of the synthetic graph and cascade generator"""
    n_nodes: int = Field(default=3000, ge=1)
    n_communities: int = Field(default=4, ge=1)
    p_in: float = Field(default=0.0047, ge=0.0, le=1.0, description="Edge probability within a community")
    p_out: float = Field(default=0.00018, ge=0.0, le=1.0, description="Edge probability between communities")
    cascade_count: int = Field(default=30000, ge=0)
    transmission_prob: float = Field(default=0.016, ge=0.0, le=1.0, description="lambda per follower exposure")
    max_sim_time: int = Field(default=30 * 24 * 3600, gt=0, description="Seconds simulated per cascade")
    mean_delay_s: float = Field(default=300.0, gt=0.0, description="Mean exposure delay in seconds")
    structure_boost: float = Field(default=20.0, ge=0.0)
    post_time_start: int = Field(default=1309478400, description="Unix time of the first post")
    seed: int = 42

    @model_validator(mode="after")
    def _check_communities(self) -> "SynthConfig":
        if self.n_communities > self.n_nodes:
            raise ValueError(f"n_communities ({self.n_communities}) exceeds n_nodes ({self.n_nodes})")
        return self
