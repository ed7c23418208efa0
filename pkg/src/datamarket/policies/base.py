from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Protocol

import numpy as np

from ..domain import BuyerAction, DatasetMetadata, ListingSnapshot, Purchase, SellerAction


class GenerationFailed(RuntimeError):
    """A generator could not produce a valid object within its retry budget."""


@dataclass(frozen=True)
class TrendEntry:
    data_name: str
    field: str
    count: int


@dataclass(frozen=True)
class TrendSummary:
    entries: tuple[TrendEntry, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def top(self) -> TrendEntry | None:
        return self.entries[0] if self.entries else None


@dataclass(frozen=True)
class OwnedListing:
    dataset_id: str
    data_name: str
    field: str
    price: float
    version: int
    update_frequency: str
    created_step: int
    last_updated_step: int
    sales_count: int
    consecutive_unsold_steps: int


@dataclass(frozen=True)
class SellerContext:
    seller_id: str
    step: int
    revenue: float
    listings: tuple[OwnedListing, ...]
    sales_history: tuple[tuple[int, str, float], ...] = ()
    action_history: tuple[tuple[int, dict[str, Any]], ...] = ()


@dataclass(frozen=True)
class BuyerContext:
    buyer_id: str
    step: int
    goal: str
    field: str
    budget: float
    purchases: tuple[Purchase, ...]
    plan_text: str
    last_search_results: tuple[dict[str, Any], ...]
    action_history: tuple[tuple[int, dict[str, Any]], ...]
    analyze_count: int = 0
    consecutive_plan_count: int = 0

    @property
    def last_action(self) -> str | None:
        return self.action_history[-1][1]["action"] if self.action_history else None

    def owns(self, dataset_id: str, version: int) -> bool:
        return any(p.dataset_id == dataset_id and p.version == version for p in self.purchases)


class DataGenerator(Protocol):
    def generate_metadata(
        self, field: str, existing_names: Iterable[str], rng: np.random.Generator
    ) -> DatasetMetadata: ...


class GoalGenerator(Protocol):
    def generate_goal(
        self, field: str, trends: TrendSummary | None, rng: np.random.Generator
    ) -> str: ...


class SellerPolicy(Protocol):
    def decide(self, ctx: SellerContext, rng: np.random.Generator) -> SellerAction: ...


class BuyerPolicy(Protocol):
    def decide(self, ctx: BuyerContext, rng: np.random.Generator) -> BuyerAction: ...


@dataclass
class PolicySet:
    data_generator: Any
    goal_generator: Any
    seller_policy: Any
    buyer_policy: Any
    provider: str = "mock"
    extra: dict[str, Any] = field(default_factory=dict)
