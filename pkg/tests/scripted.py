"""Randomized scripted policies and event-log oracles shared by the tests."""

import functools
from collections import Counter, defaultdict

import numpy as np

from datamarket.domain import BuyerAction, SellerAction
from datamarket.policies import PolicySet
from datamarket.policies.mock import MockDataGenerator, MockGoalGenerator
from datamarket.rng import agent_number

BUYER_KINDS = ("plan", "search", "buy", "analyze", "do_nothing")
SELLER_KINDS = ("do_nothing", "update_data", "change_price", "provide_data")


@functools.lru_cache(maxsize=None)
def _profile(tag, agent_id, n, concentration):
    rng = np.random.default_rng([tag, agent_number(agent_id)])
    return np.cumsum(rng.dirichlet(np.full(n, concentration)))


def _pick(rng, cumulative):
    return min(int(np.searchsorted(cumulative, rng.random(), side="right")), len(cumulative) - 1)


class RandomBuyerPolicy:
    """Each buyer gets its own random action mix, so histories vary widely."""

    def __init__(self, concentration=0.6, tag=11):
        self.concentration = concentration
        self.tag = tag

    def decide(self, ctx, rng):
        p = _profile(self.tag, ctx.buyer_id, len(BUYER_KINDS), self.concentration)
        kind = BUYER_KINDS[_pick(rng, p)]
        if kind == "plan":
            return BuyerAction.plan(f"plan {ctx.step}")
        if kind == "search":
            return BuyerAction.search(f"{ctx.field} records")
        if kind == "buy":
            hits = ctx.last_search_results
            if hits:
                return BuyerAction.buy(hits[int(rng.integers(len(hits)))]["dataset_id"])
            return BuyerAction.buy("D999999")
        if kind == "analyze":
            return BuyerAction.analyze()
        return BuyerAction.do_nothing()


class RandomSellerPolicy:
    def __init__(self, concentration=0.5, tag=13):
        self.concentration = concentration
        self.tag = tag

    def decide(self, ctx, rng):
        p = _profile(self.tag, ctx.seller_id, len(SELLER_KINDS), self.concentration)
        kind = SELLER_KINDS[_pick(rng, p)]
        if kind == "do_nothing" or not ctx.listings:
            return SellerAction.do_nothing()
        pick = ctx.listings[int(rng.integers(len(ctx.listings)))]
        if kind == "update_data":
            return SellerAction.update_data(pick.dataset_id)
        if kind == "change_price":
            return SellerAction.change_price(pick.dataset_id, round(float(rng.uniform(1, 3000)), 2))
        return SellerAction.provide_data(pick.field)


def random_policies(cfg):
    return PolicySet(
        data_generator=MockDataGenerator(cfg.fields, cfg.mock_price_min, cfg.mock_price_max),
        goal_generator=MockGoalGenerator(),
        seller_policy=RandomSellerPolicy(),
        buyer_policy=RandomBuyerPolicy(),
        provider="scripted",
    )


def _by_agent(events, role):
    actions = defaultdict(list)
    exits = {}
    entries = {}
    for ev in events:
        if ev.get("role") != role:
            continue
        if ev["type"] == "action":
            actions[ev["agent"]].append((ev["step"], ev["action"]))
        elif ev["type"] == "exit":
            exits[ev["agent"]] = (ev["step"], ev["reason"])
        elif ev["type"] == "entry":
            entries[ev["agent"]] = ev["step"]
    return entries, actions, exits


def expected_buyer_exits(events, ratio=2, streak_limit=7):
    """Replay each buyer's logged actions and purchases; return the expected exit per buyer."""
    entries, actions, _ = _by_agent(events, "buyer")
    bought = defaultdict(Counter)
    for ev in events:
        if ev["type"] == "transaction":
            bought[ev["buyer"]][ev["step"]] += 1
    expected = {}
    for agent in entries:
        buys = analyzes = streak = 0
        expected[agent] = None
        for step, action in actions[agent]:
            streak = streak + 1 if action == "plan" else 0
            analyzes += action == "analyze"
            if action == "exit_market":
                expected[agent] = (step, "voluntary")
                break
            if buys >= 1 and analyzes > ratio * buys:
                expected[agent] = (step, "analyze_buy_ratio")
                break
            if streak > streak_limit:
                expected[agent] = (step, "plan_streak")
                break
            buys += bought[agent][step]
    return expected


def expected_seller_exits(events, last_step, unsold_limit=10):
    """Recompute per-listing unsold streaks from the log and find each seller's forced exit."""
    entries, actions, _ = _by_agent(events, "seller")
    created = defaultdict(list)
    sales = defaultdict(list)
    for ev in events:
        if ev["type"] == "listing":
            created[ev["agent"]].append((ev["step"], ev["dataset_id"]))
        elif ev["type"] == "transaction":
            sales[ev["dataset_id"]].append(ev["step"])
    acted = {a: dict(v) for a, v in actions.items()}
    expected = {}
    for agent, start in entries.items():
        expected[agent] = None
        for t in range(start, last_step + 1):
            owned = [d for c, d in created[agent] if c < t]
            streaks = []
            for c, d in created[agent]:
                if c >= t:
                    continue
                last_sale = max((s for s in sales[d] if s < t), default=c - 1)
                streaks.append((t - 1) - last_sale)
            if owned and all(s >= unsold_limit for s in streaks):
                expected[agent] = (t, "unsold_listings")
                break
            if acted.get(agent, {}).get(t) == "exit_market":
                expected[agent] = (t, "voluntary")
                break
    return expected


def logged_exits(events, role):
    return _by_agent(events, role)[2]
