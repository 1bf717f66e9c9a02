"""
Scenario documents and runtime settings.

A scenario is one JSON document with the sections game, attention,
conjecture, learning, designer and simulation. Model parameters have no
defaults; numerical knobs do.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import logging

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import BerkNashError, ConfigError, OutputError
from .game.learning import StepSchedule
from .game.model import AttentionStructure, ConjectureClass, ConjectureKind, NetworkGame
from .game.timescale import TwoScaleConfig
from .utils.json_serializer import format_json_output, load_json_from_file, save_json_to_file

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GameSection(_Section):
    G: List[List[float]]
    r: List[float]
    b: List[float]
    sigma: List[float]

    @model_validator(mode="after")
    def _check_game(self) -> "GameSection":
        try:
            self.to_game()
        except BerkNashError as e:
            raise ValueError(str(e))
        return self

    def to_game(self) -> NetworkGame:
        return NetworkGame(G=np.array(self.G, dtype=float), r=self.r, b=self.b, sigma=self.sigma)


class AttentionSection(_Section):
    subsets: List[List[int]]


class ConjectureSection(_Section):
    kind: Union[ConjectureKind, List[ConjectureKind]]


class LearningSection(_Section):
    a: float = Field(1.0, ge=0.0)
    k0: float = Field(10.0, ge=1.0)
    tol: float = Field(1e-6, gt=0.0)
    window: int = Field(100, ge=1)
    max_steps: int = Field(200_000, ge=1)
    blowup_bound: Optional[float] = Field(None, gt=0.0)

    def schedule(self) -> StepSchedule:
        return StepSchedule(a=self.a, k0=self.k0)


class DesignerSection(_Section):
    budget: float
    alpha: List[float]
    beta: List[float]
    b_hat: float = Field(0.05, ge=0.0)
    k1: float = Field(10.0, ge=1.0)
    inner_steps_per_outer: int = Field(1, ge=1)
    total_steps: int = Field(5000, ge=1)

    @field_validator("alpha", "beta")
    @classmethod
    def _positive_weights(cls, v: List[float]) -> List[float]:
        if any(not w > 0.0 for w in v):
            raise ValueError("distortion cost weights must be strictly positive")
        return v


class SimulationSection(_Section):
    seed: int = 0
    seeds: int = Field(1, ge=1)
    diagnostic_eps: float = Field(1e-4, gt=0.0)
    warm_start: bool = True


class ScenarioConfig(_Section):
    game: GameSection
    attention: Optional[AttentionSection] = None
    conjecture: ConjectureSection
    learning: LearningSection = Field(default_factory=LearningSection)
    designer: Optional[DesignerSection] = None
    simulation: SimulationSection = Field(default_factory=SimulationSection)

    @model_validator(mode="after")
    def _check_sizes(self) -> "ScenarioConfig":
        n = len(self.game.r)
        try:
            conjecture = self.to_conjecture()
            attention = self.to_attention()
            if attention is not None:
                attention.validate_for(self.game.to_game(), conjecture)
        except BerkNashError as e:
            raise ValueError(str(e))
        if self.designer is not None:
            for name in ("alpha", "beta"):
                if len(getattr(self.designer, name)) != n:
                    raise ValueError(f"designer.{name} must have {n} entries")
        return self

    def to_game(self) -> NetworkGame:
        return self.game.to_game()

    def to_attention(self) -> Optional[AttentionStructure]:
        if self.attention is None:
            return None
        return AttentionStructure(tuple(tuple(s) for s in self.attention.subsets))

    def to_conjecture(self) -> ConjectureClass:
        return ConjectureClass.coerce(self.conjecture.kind, len(self.game.r))

    def require_designer(self) -> DesignerSection:
        if self.designer is None:
            raise ConfigError("designer: section required for this command")
        return self.designer

    def two_scale_config(self, seed: Optional[int] = None) -> TwoScaleConfig:
        designer = self.require_designer()
        return TwoScaleConfig(
            budget=designer.budget,
            fast=self.learning.schedule(),
            slow=StepSchedule(a=designer.b_hat, k0=designer.k1),
            a_weights=np.array(designer.alpha),
            inner_steps_per_outer=designer.inner_steps_per_outer,
            total_steps=designer.total_steps,
            seed=self.simulation.seed if seed is None else seed,
            diagnostic_eps=self.simulation.diagnostic_eps,
            warm_start=self.simulation.warm_start,
            blowup_bound=self.learning.blowup_bound,
        )

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude_none=True)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(format_json_output(self.to_dict()).encode("utf-8")).hexdigest()

    @classmethod
    def from_model(
        cls,
        game: NetworkGame,
        attention: Optional[AttentionStructure] = None,
        conjecture: Union[ConjectureKind, str] = ConjectureKind.LMF,
        budget: float = 1.0,
        seed: int = 0,
    ) -> "ScenarioConfig":
        """Complete scenario for a game with unit designer weights."""
        n = game.n
        data = {
            "game": {
                "G": game.G.tolist(),
                "r": game.r.tolist(),
                "b": game.b.tolist(),
                "sigma": game.sigma.tolist(),
            },
            "conjecture": {"kind": ConjectureKind(conjecture).value},
            "designer": {"budget": budget, "alpha": [1.0] * n, "beta": [1.0] * n},
            "simulation": {"seed": seed},
        }
        if attention is not None:
            data["attention"] = {"subsets": attention.to_list()}
        return parse_config(data)


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        loc = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{loc}: {item['msg']}")
    return "; ".join(parts)


def parse_config(data: Any) -> ScenarioConfig:
    """Validate a parsed document, naming the offending field on failure."""
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid scenario: {_describe(e)}", details={"errors": e.errors(include_url=False)})


def load_config(config_path: Union[str, Path]) -> ScenarioConfig:
    """Load a scenario from a JSON file."""
    config_path = Path(config_path)

    if not config_path.exists():
        raise OutputError(f"Configuration file not found: {config_path}")

    try:
        data = load_json_from_file(config_path)
    except OutputError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"Unreadable configuration file: {e}")

    config = parse_config(data)
    logger.info(f"Loaded scenario from {config_path}")
    return config


def save_config(config: ScenarioConfig, config_path: Union[str, Path]) -> Path:
    """Save a scenario to a JSON file."""
    return save_json_to_file(config.to_dict(), config_path)


class RuntimeSettings(BaseModel):
    """Process-level knobs read from the environment (and a .env file if present)."""

    threads: int = Field(ge=1)
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        load_dotenv()
        raw_threads = os.getenv("BERKNASH_THREADS")
        try:
            threads = int(raw_threads) if raw_threads else min(4, os.cpu_count() or 1)
            return cls(threads=threads, log_level=os.getenv("BERKNASH_LOG_LEVEL", "INFO").upper())
        except (ValueError, ValidationError) as e:
            raise ConfigError(f"Invalid runtime settings: {e}")
