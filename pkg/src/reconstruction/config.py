"""Typed configuration for every pipeline stage.

Defaults equal the values stated for the method where they are stated
(resolution, radius, rounds, candidates per round, threshold, layer caps);
optimizer settings and epoch counts are our own choices.
"""
import json
from pathlib import Path
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigurationError

ACC_BASE = 0.98
P_BASE = 7553
P_MAX = 21121

WIDTHS = (8, 12, 16, 20, 24, 28, 32, 40, 48, 56, 64)
MAX_HIDDEN = 6
INPUT_DIM = 3

DEFAULT_ACTIVATIONS = ("relu", "elu", "swish")
KNOWN_ACTIVATIONS = ("relu", "elu", "swish", "sigmoid", "tanh")

DEFAULT_RESOLUTION = 128
DEFAULT_RADIUS = 0.9
MIN_RESOLUTION = 8


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class TrainConfig(_Frozen):
    """Optimizer schedule for one training run.

    ``epochs`` may be 0, in which case training leaves the network untouched.
    """

    epochs: int = Field(30, ge=0)
    batch_size: int = Field(2048, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(1e-8, gt=0)
    seed: int = 0

    @field_validator("adam_betas")
    @classmethod
    def _check_betas(cls, value):
        if not all(0.0 <= b < 1.0 for b in value):
            raise ValueError("adam betas must lie in [0, 1)")
        return value


class SamplingConfig(_Frozen):
    seed: int = 0
    non_support_replacement: bool = False


class SearchConfig(_Frozen):
    rounds: int = Field(5, ge=1)
    per_round: int = Field(6, ge=1)
    proxy_epochs: int = Field(3, ge=0)
    batch_size: int = Field(2048, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    controller_lr: float = Field(1.0, gt=0)
    baseline_decay: float = Field(0.7, ge=0, lt=1)
    temperature: float = Field(1.0, gt=0)
    size_reward_enabled: bool = True
    # Score candidates on a seeded subsample of this many voxels instead of the full grid.
    accuracy_subsample: Optional[int] = Field(None, ge=1)
    parallel_candidates: bool = False
    seed: int = 0

    def proxy_train_config(self, offset=0):
        return TrainConfig(
            epochs=self.proxy_epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed + offset,
        )


class SelectionConfig(_Frozen):
    threshold: float = Field(0.001, ge=0, lt=1)
    final_epochs: int = Field(30, ge=0)
    postprocess_enabled: bool = True


class PipelineConfig(_Frozen):
    """Everything a full run needs; what a ``--config`` JSON file holds."""

    resolution: int = Field(DEFAULT_RESOLUTION, ge=MIN_RESOLUTION)
    radius: float = Field(DEFAULT_RADIUS, gt=0, le=1)
    rounds: int = Field(5, ge=1)
    per_round: int = Field(6, ge=1)
    proxy_epochs: int = Field(3, ge=0)
    final_epochs: int = Field(30, ge=0)
    threshold: float = Field(0.001, ge=0, lt=1)
    activations: Tuple[str, ...] = DEFAULT_ACTIVATIONS
    size_reward_enabled: bool = True
    postprocess_enabled: bool = True
    fixed_arch: Optional[str] = None
    batch_size: int = Field(2048, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    controller_lr: float = Field(1.0, gt=0)
    baseline_decay: float = Field(0.7, ge=0, lt=1)
    accuracy_subsample: Optional[int] = Field(None, ge=1)
    non_support_replacement: bool = False
    parallel_candidates: bool = False
    seed: int = 0

    @field_validator("activations")
    @classmethod
    def _check_activations(cls, value):
        if not value:
            raise ValueError("at least one activation is required")
        names = tuple(v.lower() for v in value)
        unknown = [n for n in names if n not in KNOWN_ACTIVATIONS]
        if unknown:
            raise ValueError(f"Invalid activation value: {unknown[0]}")
        return names

    @classmethod
    def from_file(cls, path, **overrides):
        """Load a JSON config file, then apply non-None keyword overrides."""
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Failed to read config {path}: {e}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return build_config(cls, **data)

    def sampling_config(self):
        return SamplingConfig(seed=self.seed, non_support_replacement=self.non_support_replacement)

    def search_config(self):
        return SearchConfig(
            rounds=self.rounds,
            per_round=self.per_round,
            proxy_epochs=self.proxy_epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            controller_lr=self.controller_lr,
            baseline_decay=self.baseline_decay,
            size_reward_enabled=self.size_reward_enabled,
            accuracy_subsample=self.accuracy_subsample,
            parallel_candidates=self.parallel_candidates,
            seed=self.seed,
        )

    def selection_config(self):
        return SelectionConfig(
            threshold=self.threshold,
            final_epochs=self.final_epochs,
            postprocess_enabled=self.postprocess_enabled,
        )

    def final_train_config(self):
        return TrainConfig(
            epochs=self.final_epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
        )


def build_config(model, **values):
    """Construct a config model, turning validation failures into ConfigurationError."""
    try:
        return model(**values)
    except ValidationError as e:
        raise ConfigurationError(str(e))
