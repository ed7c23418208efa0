"""Simulation configuration.

A :class:`SimConfig` is flat in memory but serialized as a sectioned YAML
document so the file stays readable.  Every default matches the baseline
market: 10 buyers, 5 sellers, 40 steps and the logistic entry curve with
``L=50, k=0.03, x0=100``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

DEFAULT_FIELDS = (
    "cybersecurity",
    "education",
    "environmental science",
    "finance",
    "healthcare",
    "manufacturing",
    "marketing",
    "social media",
    "sports",
    "urban planning",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    # market
    initial_buyers: int = 10
    initial_sellers: int = 5
    budget_levels: tuple[float, ...] = (1000.0, 10000.0, 100000.0)
    max_steps: int = 40
    fields: tuple[str, ...] = DEFAULT_FIELDS
    rng_seed: int = 0
    agent_order: str = "ascending"
    policy_workers: int = 0
    # entry
    entry_L: float = 50.0
    entry_k: float = 0.03
    entry_x0: float = 100.0
    entry_window_steps: int = 1
    entry_mode: str = "deterministic"
    trend_probability: float = 0.5
    # exits
    seller_unsold_exit_steps: int = 10
    buyer_ratio_threshold: float = 2.0
    plan_streak_threshold: int = 7
    # search
    top_k_search: int = 20
    embedding_dim: int = 256
    embedder: str = "mock"
    embedding_model: str = "text-embedding-3-large"
    # trends
    trend_window_steps: int = 5
    trend_top_n: int = 5
    # llm
    llm_endpoint: str = "https://api.openai.com/v1/chat/completions"
    llm_model: str = "gpt-4o"
    llm_api_key_env: str = "DATAMARKET_LLM_API_KEY"
    llm_retry_limit: int = 3
    subscription_prompt: bool = False
    # mock policies
    mock_seller_idle_probability: float = 0.8
    mock_buyer_research_probability: float = 0.3
    mock_similarity_floor: float = 0.2
    mock_price_min: float = 50.0
    mock_price_max: float = 5000.0
    mock_price_cut: float = 0.2
    mock_stale_steps: int = 2
    mock_unsold_reprice_steps: int = 5

    def __post_init__(self):
        # yaml/json hand us lists
        for name in ("budget_levels", "fields"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))
        object.__setattr__(
            self, "budget_levels", tuple(float(b) for b in self.budget_levels)
        )

    def problems(self) -> list[str]:
        out = []
        for name in (
            "initial_buyers",
            "initial_sellers",
            "max_steps",
            "entry_window_steps",
            "seller_unsold_exit_steps",
            "top_k_search",
            "embedding_dim",
            "trend_window_steps",
            "trend_top_n",
        ):
            if getattr(self, name) < 1:
                out.append(f"{name} must be positive")
        for name in (
            "trend_probability",
            "mock_seller_idle_probability",
            "mock_buyer_research_probability",
            "mock_price_cut",
        ):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                out.append(f"{name} must lie in [0, 1]")
        if not self.budget_levels:
            out.append("budget_levels must not be empty")
        if any(not math.isfinite(b) or b < 0 for b in self.budget_levels):
            out.append("budget_levels must be finite and non-negative")
        if not self.fields or len(set(self.fields)) != len(self.fields):
            out.append("fields must be non-empty and distinct")
        if not (self.entry_L > 0 and math.isfinite(self.entry_L)):
            out.append("entry_L must be positive")
        if not (math.isfinite(self.entry_k) and math.isfinite(self.entry_x0)):
            out.append("entry_k and entry_x0 must be finite")
        if self.entry_mode not in ("deterministic", "poisson"):
            out.append("entry_mode must be 'deterministic' or 'poisson'")
        if self.agent_order not in ("ascending", "shuffled"):
            out.append("agent_order must be 'ascending' or 'shuffled'")
        if self.embedder not in ("mock", "http"):
            out.append("embedder must be 'mock' or 'http'")
        if self.buyer_ratio_threshold < 0 or self.plan_streak_threshold < 0:
            out.append("exit thresholds must be non-negative")
        if self.llm_retry_limit < 0 or self.policy_workers < 0:
            out.append("llm_retry_limit and policy_workers must be non-negative")
        if not 0 < self.mock_price_min <= self.mock_price_max:
            out.append("mock price range must satisfy 0 < min <= max")
        return out

    def validate(self) -> "SimConfig":
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, dict[str, Any]]:
        """Sectioned plain-data view, the shape written to config files."""
        out: dict[str, dict[str, Any]] = {}
        for section, names in SECTIONS.items():
            block = {}
            for name in names:
                value = getattr(self, name)
                block[name] = list(value) if isinstance(value, tuple) else value
            out[section] = block
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        flat: dict[str, Any] = {}
        known = {f.name for f in fields(cls)}
        for key, value in (data or {}).items():
            if key in SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"section {key!r} must be a mapping")
                for sub, subval in value.items():
                    if sub not in SECTIONS[key]:
                        raise ConfigError(f"unknown key {key}.{sub}")
                    flat[sub] = subval
            elif key in known:
                flat[key] = value
            else:
                raise ConfigError(f"unknown key {key!r}")
        try:
            return cls(**flat).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, allow_unicode=True)

    @classmethod
    def from_yaml(cls, text: str) -> "SimConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config does not parse: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        return cls.from_dict(data or {})


SECTIONS: dict[str, tuple[str, ...]] = {
    "market": (
        "initial_buyers",
        "initial_sellers",
        "budget_levels",
        "max_steps",
        "fields",
        "rng_seed",
        "agent_order",
        "policy_workers",
    ),
    "entry": (
        "entry_L",
        "entry_k",
        "entry_x0",
        "entry_window_steps",
        "entry_mode",
        "trend_probability",
    ),
    "exits": ("seller_unsold_exit_steps", "buyer_ratio_threshold", "plan_streak_threshold"),
    "search": ("top_k_search", "embedding_dim", "embedder", "embedding_model"),
    "trends": ("trend_window_steps", "trend_top_n"),
    "llm": (
        "llm_endpoint",
        "llm_model",
        "llm_api_key_env",
        "llm_retry_limit",
        "subscription_prompt",
    ),
    "mock": (
        "mock_seller_idle_probability",
        "mock_buyer_research_probability",
        "mock_similarity_floor",
        "mock_price_min",
        "mock_price_max",
        "mock_price_cut",
        "mock_stale_steps",
        "mock_unsold_reprice_steps",
    ),
}

assert sorted(n for names in SECTIONS.values() for n in names) == sorted(
    f.name for f in fields(SimConfig)
)


def load_config(path: str | Path | None) -> SimConfig:
    """Read a YAML config; ``None`` or ``"default"`` gives the defaults."""
    if path is None or str(path) == "default":
        return SimConfig().validate()
    return SimConfig.from_yaml(Path(path).read_text(encoding="utf-8"))
