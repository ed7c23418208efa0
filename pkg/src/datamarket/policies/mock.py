"""Deterministic stand-ins for the text-completion policies.

Each mock is a pure function of its context and the generator handed in, so
a run with mock policies replays exactly from its seed.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from ..config import SimConfig
from ..domain import (
    BuyerAction,
    DatasetMetadata,
    SellerAction,
    UpdateFrequency,
    to_cents,
)
from ..vectorstore import tokenize
from .base import BuyerContext, PolicySet, SellerContext, TrendSummary

SUBJECTS = {
    "cybersecurity": ["intrusion alerts", "phishing reports", "malware samples", "vulnerability scans", "firewall logs", "login anomalies"],
    "education": ["student grades", "course enrollment", "attendance records", "test scores", "teacher workload", "dropout rates"],
    "environmental science": ["air quality", "water pollution", "carbon emissions", "biodiversity counts", "soil moisture", "weather stations"],
    "finance": ["stock prices", "credit defaults", "loan applications", "exchange rates", "bond yields", "card transactions"],
    "healthcare": ["patient admissions", "vaccination status", "clinical trials", "hospital readmissions", "prescription volumes", "disease incidence"],
    "manufacturing": ["machine sensors", "defect rates", "production output", "supply lead times", "energy consumption", "maintenance logs"],
    "marketing": ["campaign clicks", "customer reviews", "ad impressions", "loyalty purchases", "email conversions", "brand surveys"],
    "social media": ["post engagement", "hashtag mentions", "follower growth", "sentiment scores", "influencer reach", "video views"],
    "sports": ["player performance", "match results", "shot charts", "injury reports", "team rankings", "ticket sales"],
    "urban planning": ["traffic congestion", "public transit ridership", "land use", "housing permits", "pedestrian counts", "parking occupancy"],
}
GENERIC_SUBJECTS = ["activity records", "usage statistics", "event counts", "survey responses", "time series", "regional indicators"]
PURPOSES = [
    "build a predictive model for the next quarter",
    "identify the key drivers of recent changes",
    "detect anomalies and their root causes",
    "compare regional differences and propose improvements",
    "forecast demand and plan resources",
]
STOPWORDS = {
    "a", "an", "and", "the", "to", "of", "for", "in", "on", "with", "by", "from", "its",
    "their", "analyze", "study", "following", "market", "trend", "around", "data",
}


def _subjects(field: str) -> list[str]:
    return SUBJECTS.get(field, GENERIC_SUBJECTS)


def _slug(field: str) -> str:
    return "_".join(tokenize(field)) or "data"


class MockDataGenerator:
    def __init__(self, fields: Iterable[str], price_min: float = 50.0, price_max: float = 5000.0):
        self.fields = tuple(fields)
        self.price_min = price_min
        self.price_max = price_max

    def generate_metadata(self, field, existing_names, rng) -> DatasetMetadata:
        if field not in self.fields:
            raise ValueError(f"field {field!r} is not configured")
        existing = existing_names if isinstance(existing_names, (set, frozenset)) else set(existing_names)
        n = len(existing) + 1
        name = f"{_slug(field)}_data_{n}"
        while name in existing:
            n += 1
            name = f"{_slug(field)}_data_{n}"
        subjects = _subjects(field)
        picks = rng.choice(len(subjects), size=3, replace=False)
        main = subjects[picks[0]]
        columns = ["id", "date"] + ["_".join(tokenize(subjects[i])) for i in picks]
        price = math.exp(rng.uniform(math.log(self.price_min), math.log(self.price_max)))
        freq = list(UpdateFrequency)[int(rng.integers(4))]
        desc = (
            f"This dataset contains {main} records in {field}, together with "
            f"{subjects[picks[1]]} and {subjects[picks[2]]}."
        )
        return DatasetMetadata(
            data_name=name,
            description=desc,
            columns=tuple(columns),
            tags=(field,),
            data_price=max(0.01, to_cents(price) / 100),
            update_frequency=freq.value,
        )


class MockGoalGenerator:
    def generate_goal(self, field: str, trends: TrendSummary | None, rng) -> str:
        subjects = _subjects(field)
        subject = subjects[int(rng.integers(len(subjects)))]
        purpose = PURPOSES[int(rng.integers(len(PURPOSES)))]
        if trends:
            return (
                f"Analyze {field} following the market trend around {trends.top.data_name}: "
                f"study {subject} to {purpose}."
            )
        return f"Analyze {field}: study {subject} to {purpose}."


class MockSellerPolicy:
    """Mostly idle; otherwise refresh stale dynamic data, cut unsold prices, or expand."""

    def __init__(
        self,
        idle_probability: float = 0.8,
        stale_steps: int = 2,
        unsold_steps: int = 5,
        price_cut: float = 0.2,
    ):
        self.idle_probability = idle_probability
        self.stale_steps = stale_steps
        self.unsold_steps = unsold_steps
        self.price_cut = price_cut

    def decide(self, ctx: SellerContext, rng) -> SellerAction:
        if rng.random() < self.idle_probability or not ctx.listings:
            return SellerAction.do_nothing()
        listings = sorted(ctx.listings, key=lambda l: l.dataset_id)
        for l in listings:
            if (
                l.update_frequency in ("medium", "high")
                and ctx.step - l.last_updated_step >= self.stale_steps
            ):
                return SellerAction.update_data(l.dataset_id)
        for l in listings:
            if l.consecutive_unsold_steps >= self.unsold_steps:
                new_price = to_cents(l.price * (1.0 - self.price_cut)) / 100
                if new_price > 0:
                    return SellerAction.change_price(l.dataset_id, new_price)
        return SellerAction.provide_data(listings[0].field)


def goal_query(goal: str, max_terms: int = 12) -> str:
    terms = []
    for tok in tokenize(goal):
        if tok not in STOPWORDS and tok not in terms:
            terms.append(tok)
    return " ".join(terms[:max_terms]) or goal


class MockBuyerPolicy:
    """Plan, search, buy the cheapest affordable relevant hit, then analyze.

    After an analyze the buyer searches again with probability
    ``research_probability`` and otherwise keeps analyzing.  A search that
    yields nothing buyable is followed by ``do_nothing`` and another search.
    """

    def __init__(self, similarity_floor: float = 0.2, research_probability: float = 0.3):
        self.similarity_floor = similarity_floor
        self.research_probability = research_probability

    def candidates(self, ctx: BuyerContext) -> list[dict]:
        out = []
        for hit in ctx.last_search_results:
            if hit["similarity"] < self.similarity_floor:
                continue
            if hit["price"] > ctx.budget:
                continue
            if ctx.owns(hit["dataset_id"], hit["version"]):
                continue
            out.append(hit)
        return sorted(out, key=lambda h: (h["price"], h["dataset_id"]))

    def decide(self, ctx: BuyerContext, rng) -> BuyerAction:
        last = ctx.last_action
        if not ctx.plan_text:
            return BuyerAction.plan(f"Plan: find datasets to {ctx.goal[0].lower()}{ctx.goal[1:]}")
        if last in (None, "plan", "do_nothing"):
            return BuyerAction.search(goal_query(ctx.goal))
        if last == "search":
            cands = self.candidates(ctx)
            if cands:
                return BuyerAction.buy(cands[0]["dataset_id"])
            return BuyerAction.do_nothing()
        if last == "buy":
            return BuyerAction.analyze()
        if last == "analyze":
            if rng.random() < self.research_probability:
                return BuyerAction.search(goal_query(ctx.goal))
            return BuyerAction.analyze()
        return BuyerAction.search(goal_query(ctx.goal))


def mock_policies(cfg: SimConfig) -> PolicySet:
    return PolicySet(
        data_generator=MockDataGenerator(cfg.fields, cfg.mock_price_min, cfg.mock_price_max),
        goal_generator=MockGoalGenerator(),
        seller_policy=MockSellerPolicy(
            cfg.mock_seller_idle_probability,
            cfg.mock_stale_steps,
            cfg.mock_unsold_reprice_steps,
            cfg.mock_price_cut,
        ),
        buyer_policy=MockBuyerPolicy(cfg.mock_similarity_floor, cfg.mock_buyer_research_probability),
        provider="mock",
    )
