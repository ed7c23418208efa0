"""Domain types shared by the engine, the policies and the metrics.

Money is tracked in integer cents on agents and listings so that budget,
revenue and transaction totals reconcile exactly; the float views
(``budget``, ``revenue``, ``data_price``) are derived from the cents.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .config import SimConfig


class UpdateFrequency(str, enum.Enum):
    STATIC = "static"
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


def to_cents(amount: float) -> int:
    return int(round(float(amount) * 100))


def from_cents(cents: int) -> float:
    return cents / 100


@dataclass(frozen=True)
class DatasetMetadata:
    data_name: str
    description: str
    columns: tuple[str, ...]
    tags: tuple[str, ...]
    data_price: float
    update_frequency: str

    def __post_init__(self):
        for name in ("columns", "tags"):
            value = getattr(self, name)
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",")]
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))
        if isinstance(self.update_frequency, UpdateFrequency):
            object.__setattr__(self, "update_frequency", self.update_frequency.value)

    def field_tag(self, fields: Iterable[str]) -> str | None:
        hits = [t for t in self.tags if t in set(fields)]
        return hits[0] if len(hits) == 1 else None

    def embedding_text(self) -> str:
        return "\n".join(
            [
                self.data_name,
                self.description,
                "columns: " + ", ".join(self.columns),
                "tags: " + ", ".join(self.tags),
            ]
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "data_name": self.data_name,
            "description": self.description,
            "columns": list(self.columns),
            "tags": list(self.tags),
            "data_price": self.data_price,
            "update_frequency": self.update_frequency,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DatasetMetadata":
        return cls(
            data_name=str(data["data_name"]).strip(),
            description=str(data.get("description", "")),
            columns=data.get("columns", ()),
            tags=data.get("tags", ()),
            data_price=float(data["data_price"]),
            update_frequency=str(data.get("update_frequency", "")).strip().lower(),
        )


def validate_metadata(
    m: DatasetMetadata,
    existing_names: Iterable[str] = (),
    fields: Iterable[str] | None = None,
) -> list[str]:
    """Return every violated metadata invariant; an empty list means valid."""
    violations = []
    if not m.data_name or not m.data_name.strip():
        violations.append("empty name")
    elif m.data_name in (
        existing_names if isinstance(existing_names, (set, frozenset, dict)) else set(existing_names)
    ):
        violations.append("duplicate name")
    price = m.data_price
    if not isinstance(price, (int, float)) or not math.isfinite(price):
        violations.append("non-finite price")
    elif to_cents(price) <= 0:
        violations.append("non-positive price")
    if m.update_frequency not in {f.value for f in UpdateFrequency}:
        violations.append("bad update_frequency")
    if not m.columns:
        violations.append("empty columns")
    elif any(not c or not str(c).strip() for c in m.columns):
        violations.append("empty column name")
    if fields is not None:
        tagged = [t for t in m.tags if t in set(fields)]
        if len(tagged) != 1:
            violations.append("tags must contain exactly one field tag")
    return violations


@dataclass(frozen=True)
class ListingSnapshot:
    """Read-only view of a listing as buyers and prompts see it."""

    dataset_id: str
    seller_id: str
    data_name: str
    description: str
    columns: tuple[str, ...]
    tags: tuple[str, ...]
    price: float
    update_frequency: str
    version: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset_id": self.dataset_id,
            "seller_id": self.seller_id,
            "data_name": self.data_name,
            "description": self.description,
            "columns": list(self.columns),
            "tags": list(self.tags),
            "price": self.price,
            "update_frequency": self.update_frequency,
            "version": self.version,
        }


@dataclass
class DatasetListing:
    dataset_id: str
    seller_id: str
    metadata: DatasetMetadata
    created_step: int
    version: int = 1
    last_updated_step: int = -1
    sales_count: int = 0
    consecutive_unsold_steps: int = 0
    active: bool = True
    price_cents: int = 0

    def __post_init__(self):
        if self.last_updated_step < 0:
            self.last_updated_step = self.created_step
        self.price_cents = to_cents(self.metadata.data_price)
        self.metadata = dataclasses.replace(
            self.metadata, data_price=from_cents(self.price_cents)
        )

    @property
    def price(self) -> float:
        return from_cents(self.price_cents)

    def set_price(self, new_price: float) -> None:
        self.price_cents = to_cents(new_price)
        self.metadata = dataclasses.replace(self.metadata, data_price=self.price)

    def snapshot(self) -> ListingSnapshot:
        m = self.metadata
        return ListingSnapshot(
            dataset_id=self.dataset_id,
            seller_id=self.seller_id,
            data_name=m.data_name,
            description=m.description,
            columns=m.columns,
            tags=m.tags,
            price=self.price,
            update_frequency=m.update_frequency,
            version=self.version,
        )


class SellerActionKind(str, enum.Enum):
    UPDATE_DATA = "update_data"
    CHANGE_PRICE = "change_price"
    PROVIDE_DATA = "provide_data"
    DO_NOTHING = "do_nothing"
    EXIT_MARKET = "exit_market"


class BuyerActionKind(str, enum.Enum):
    PLAN = "plan"
    SEARCH = "search"
    BUY = "buy"
    ANALYZE = "analyze"
    DO_NOTHING = "do_nothing"
    EXIT_MARKET = "exit_market"


@dataclass(frozen=True)
class SellerAction:
    kind: SellerActionKind
    dataset_id: str | None = None
    new_price: float | None = None
    field: str | None = None
    reasoning: str = ""

    @classmethod
    def update_data(cls, dataset_id: str, reasoning: str = "") -> "SellerAction":
        return cls(SellerActionKind.UPDATE_DATA, dataset_id=dataset_id, reasoning=reasoning)

    @classmethod
    def change_price(cls, dataset_id: str, new_price: float, reasoning: str = "") -> "SellerAction":
        return cls(
            SellerActionKind.CHANGE_PRICE,
            dataset_id=dataset_id,
            new_price=new_price,
            reasoning=reasoning,
        )

    @classmethod
    def provide_data(cls, field: str, reasoning: str = "") -> "SellerAction":
        return cls(SellerActionKind.PROVIDE_DATA, field=field, reasoning=reasoning)

    @classmethod
    def do_nothing(cls, reasoning: str = "") -> "SellerAction":
        return cls(SellerActionKind.DO_NOTHING, reasoning=reasoning)

    @classmethod
    def exit_market(cls, reasoning: str = "") -> "SellerAction":
        return cls(SellerActionKind.EXIT_MARKET, reasoning=reasoning)

    def payload(self) -> dict[str, Any]:
        d: dict[str, Any] = {"action": self.kind.value}
        if self.dataset_id is not None:
            d["dataset_id"] = self.dataset_id
        if self.new_price is not None:
            d["new_price"] = self.new_price
        if self.field is not None:
            d["field"] = self.field
        return d


@dataclass(frozen=True)
class BuyerAction:
    kind: BuyerActionKind
    text: str | None = None
    dataset_id: str | None = None
    reasoning: str = ""

    @classmethod
    def plan(cls, text: str, reasoning: str = "") -> "BuyerAction":
        return cls(BuyerActionKind.PLAN, text=text, reasoning=reasoning)

    @classmethod
    def search(cls, query: str, reasoning: str = "") -> "BuyerAction":
        return cls(BuyerActionKind.SEARCH, text=query, reasoning=reasoning)

    @classmethod
    def buy(cls, dataset_id: str, reasoning: str = "") -> "BuyerAction":
        return cls(BuyerActionKind.BUY, dataset_id=dataset_id, reasoning=reasoning)

    @classmethod
    def analyze(cls, reasoning: str = "") -> "BuyerAction":
        return cls(BuyerActionKind.ANALYZE, reasoning=reasoning)

    @classmethod
    def do_nothing(cls, reasoning: str = "") -> "BuyerAction":
        return cls(BuyerActionKind.DO_NOTHING, reasoning=reasoning)

    @classmethod
    def exit_market(cls, reasoning: str = "") -> "BuyerAction":
        return cls(BuyerActionKind.EXIT_MARKET, reasoning=reasoning)

    @property
    def query(self) -> str | None:
        return self.text if self.kind is BuyerActionKind.SEARCH else None

    def payload(self) -> dict[str, Any]:
        d: dict[str, Any] = {"action": self.kind.value}
        if self.kind is BuyerActionKind.PLAN:
            d["plan"] = self.text
        elif self.kind is BuyerActionKind.SEARCH:
            d["query"] = self.text
        if self.dataset_id is not None:
            d["dataset_id"] = self.dataset_id
        return d


@dataclass
class SellerState:
    seller_id: str
    field: str
    entered_step: int
    revenue_cents: int = 0
    owned_datasets: list[str] = dataclasses.field(default_factory=list)
    action_history: list[tuple[int, SellerAction]] = dataclasses.field(default_factory=list)
    active: bool = True

    @property
    def revenue(self) -> float:
        return from_cents(self.revenue_cents)


@dataclass(frozen=True)
class Purchase:
    dataset_id: str
    version: int
    step: int
    price: float


@dataclass
class BuyerState:
    buyer_id: str
    field: str
    goal: str
    entered_step: int
    budget_cents: int
    initial_budget_cents: int = -1
    trend_conditioned: bool = False
    purchases: list[Purchase] = dataclasses.field(default_factory=list)
    plan_text: str = ""
    last_search_results: list[dict[str, Any]] = dataclasses.field(default_factory=list)
    analyze_count: int = 0
    consecutive_plan_count: int = 0
    action_history: list[tuple[int, BuyerAction]] = dataclasses.field(default_factory=list)
    active: bool = True

    def __post_init__(self):
        if self.initial_budget_cents < 0:
            self.initial_budget_cents = self.budget_cents

    @property
    def budget(self) -> float:
        return from_cents(self.budget_cents)

    @property
    def buy_count(self) -> int:
        return len(self.purchases)


@dataclass(frozen=True)
class Transaction:
    step: int
    buyer_id: str
    seller_id: str
    dataset_id: str
    version: int
    price: float

    CSV_FIELDS = ("step", "buyer_id", "seller_id", "dataset_id", "version", "price")

    def row(self) -> list[Any]:
        return [self.step, self.buyer_id, self.seller_id, self.dataset_id, self.version, self.price]


def entry_rate(x: float, cfg: SimConfig) -> float:
    """Logistic entrant count ``L / (1 + exp(-k (x - x0)))`` for recent volume ``x``."""
    z = -cfg.entry_k * (x - cfg.entry_x0)
    if z > 700:
        # exp overflow; the logistic is L * exp(-z) to double precision here
        return cfg.entry_L * math.exp(-z)
    return cfg.entry_L / (1.0 + math.exp(z))


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def draw_budget(rng: np.random.Generator, levels: Iterable[float]) -> float:
    levels = tuple(levels)
    return levels[int(rng.integers(len(levels)))]


@dataclass
class MarketState:
    step: int = 0
    buyers: dict[str, BuyerState] = field(default_factory=dict)
    sellers: dict[str, SellerState] = field(default_factory=dict)
    listings: dict[str, DatasetListing] = field(default_factory=dict)
    transactions: list[Transaction] = field(default_factory=list)
    used_names: set[str] = field(default_factory=set)
    step_volumes: list[int] = field(default_factory=list)
    n_buyers_created: int = 0
    n_sellers_created: int = 0
    n_datasets_created: int = 0
    sales_by_seller: dict[str, list[Transaction]] = field(default_factory=dict)

    def active_buyers(self) -> list[BuyerState]:
        return [b for b in self.buyers.values() if b.active]

    def active_sellers(self) -> list[SellerState]:
        return [s for s in self.sellers.values() if s.active]

    def active_listings(self) -> list[DatasetListing]:
        return [d for d in self.listings.values() if d.active]
