import dataclasses
import pickle

import pytest

from datamarket import SimConfig, Simulation, simulate
from datamarket.domain import BuyerAction, SellerAction, SellerActionKind
from datamarket.engine import (
    PurchaseRequest,
    SimulationAborted,
    buyer_exit_reason,
    encode_event,
    seller_must_exit,
    trend_summary,
)
from datamarket.policies import mock_policies
from datamarket.policies.mock import MockBuyerPolicy
from datamarket.vectorstore import ProviderUnavailable


def started(cfg):
    sim = Simulation(cfg, mock_policies(cfg))
    sim.initialize()
    return sim


def events_of(sim, kind):
    return [e for e in sim.events if e["type"] == kind]


class TestInitialize:
    def test_defaults(self):
        sim = started(SimConfig())
        st = sim.state
        assert (len(st.buyers), len(st.sellers), len(st.listings)) == (10, 5, 5)
        assert len(sim.store) == 5
        assert all(b.budget in (1000.0, 10000.0, 100000.0) for b in st.buyers.values())
        assert all("market trend" not in b.goal for b in st.buyers.values())

    def test_reproducible(self):
        a, b = started(SimConfig(rng_seed=3)), started(SimConfig(rng_seed=3))
        assert pickle.dumps(a.state) == pickle.dumps(b.state)
        assert pickle.dumps(a.state) != pickle.dumps(started(SimConfig(rng_seed=4)).state)


class TestEntry:
    @pytest.mark.parametrize("volume, expected", [(100, 25), (0, 2)])
    def test_entrant_counts(self, volume, expected):
        sim = started(SimConfig())
        sim.state.step = 1
        sim.state.step_volumes = [volume]
        report = sim.entry_phase()
        assert len(report.entrants["buyers"]) == len(report.entrants["sellers"]) == expected

    def test_no_entry_at_step_zero(self):
        sim = started(SimConfig())
        assert sim.entry_phase().entrants == {"buyers": [], "sellers": []}

    def test_poisson_mode(self):
        sim = started(SimConfig(entry_mode="poisson", rng_seed=1))
        sim.state.step = 1
        sim.state.step_volumes = [100]
        n = len(sim.entry_phase().entrants["buyers"])
        assert 5 <= n <= 50


class TestTransactions:
    def _setup(self, budget, price):
        sim = started(SimConfig())
        buyer = sim.state.buyers["B000001"]
        buyer.budget_cents = buyer.initial_budget_cents = budget * 100
        listing = next(iter(sim.state.listings.values()))
        listing.set_price(price)
        return sim, buyer, listing

    def test_success(self):
        sim, buyer, listing = self._setup(10_000, 1_500)
        seller = sim.state.sellers[listing.seller_id]
        (tx,) = sim.transaction_phase([PurchaseRequest(buyer.buyer_id, listing.dataset_id, 1_500.0)])
        assert buyer.budget == 8_500.0 and seller.revenue == 1_500.0
        assert tx.price == 1_500.0 and listing.consecutive_unsold_steps == 0

    def test_insufficient_budget(self):
        sim, buyer, listing = self._setup(1_000, 1_500)
        assert sim.transaction_phase([PurchaseRequest(buyer.buyer_id, listing.dataset_id, 1_500.0)]) == []
        sim.log.commit()
        (ev,) = events_of(sim, "purchase_rejected")
        assert ev["reason"] == "insufficient budget" and buyer.budget == 1_000.0

    def test_rebuy_after_update(self):
        sim, buyer, listing = self._setup(10_000, 10)
        req = PurchaseRequest(buyer.buyer_id, listing.dataset_id, 10.0)
        sim.transaction_phase([req])
        seller = sim.state.sellers[listing.seller_id]
        sim._apply_seller_action(seller, SellerAction.update_data(listing.dataset_id), sim.entry_phase())
        sim.transaction_phase([req])
        assert [t.version for t in sim.state.transactions] == [1, 2]


class TestExitRules:
    @pytest.mark.parametrize(
        "analyze, buys, streak, reason",
        [
            (5, 2, 0, "analyze_buy_ratio"),
            (4, 2, 0, None),
            (9, 0, 0, None),
            (0, 0, 8, "plan_streak"),
            (0, 0, 7, None),
        ],
    )
    def test_buyer(self, analyze, buys, streak, reason):
        assert buyer_exit_reason(analyze, buys, streak, SimConfig()) == reason

    def test_seller(self):
        cfg = SimConfig()
        assert seller_must_exit([10, 12], cfg)
        assert not seller_must_exit([10, 9], cfg)
        assert not seller_must_exit([], cfg)

    def test_plan_streak_in_engine(self):
        cfg = SimConfig(initial_buyers=1, initial_sellers=1, max_steps=12, entry_L=0.1)

        class Planner:
            def decide(self, ctx, rng):
                return BuyerAction.plan("again")

        pol = dataclasses.replace(mock_policies(cfg), buyer_policy=Planner())
        result = Simulation(cfg, pol).run()
        (ev,) = [e for e in result.events if e["type"] == "exit" and e["role"] == "buyer"]
        assert (ev["step"], ev["reason"]) == (7, "plan_streak")

    def test_exited_seller_listings_leave_search(self):
        sim = started(SimConfig())
        seller = sim.state.sellers["S000001"]
        (did,) = seller.owned_datasets
        sim._apply_seller_action(seller, SellerAction.exit_market(), sim.entry_phase())
        vec = sim.embedder.embed(sim.state.listings[did].metadata.embedding_text())
        assert did not in [h.dataset_id for h in sim.store.search(vec, 50)]


def test_trend_summary():
    sim = started(SimConfig())
    ids = sorted(sim.state.listings)
    listing = sim.state.listings[ids[0]]
    sim.state.buyers["B000010"].budget_cents = 10**9
    for step, did in [(0, ids[1]), (1, ids[0]), (1, ids[0]), (2, ids[1]), (3, ids[2])]:
        req = PurchaseRequest("B000010", did, 0.0)
        sim.state.step = step
        sim.transaction_phase([req])
    top = trend_summary(sim.state, 3, 2, 5)
    assert [(e.data_name, e.count) for e in top.entries] == [
        (listing.metadata.data_name, 2),
        (sim.state.listings[ids[1]].metadata.data_name, 1),
    ]
    assert not trend_summary(sim.state, 0, 2, 5)


def test_unknown_buy_is_downgraded():
    sim = started(SimConfig())
    sim._apply_buyer_action(sim.state.buyers["B000001"], BuyerAction.buy("D999999"), sim.entry_phase())
    sim.log.commit()
    (down,) = events_of(sim, "downgrade")
    assert down["requested"]["dataset_id"] == "D999999"
    assert events_of(sim, "action")[-1]["action"] == "do_nothing"


def test_halts_when_everyone_leaves():
    cfg = SimConfig(max_steps=40, entry_L=0.1)

    class Leaver:
        def decide(self, ctx, rng):
            return BuyerAction.exit_market() if hasattr(ctx, "buyer_id") else SellerAction.exit_market()

    pol = dataclasses.replace(mock_policies(cfg), buyer_policy=Leaver(), seller_policy=Leaver())
    result = Simulation(cfg, pol).run()
    assert result.state.step == 1
    assert {e["reason"] for e in result.events if e["type"] == "exit"} == {"voluntary"}


def _blob(result):
    return "\n".join(encode_event(e) for e in result.events)


def test_worker_fan_out_is_deterministic():
    base = SimConfig(rng_seed=11, max_steps=15)
    assert _blob(simulate(base)) == _blob(simulate(dataclasses.replace(base, policy_workers=4)))


def test_shuffled_order():
    cfg = SimConfig(rng_seed=2, max_steps=10, agent_order="shuffled")
    a = simulate(cfg)
    assert _blob(a) == _blob(simulate(cfg))
    buyers = [e["agent"] for e in a.events if e["type"] == "action" and e["role"] == "buyer" and e["step"] == 5]
    assert buyers != sorted(buyers)


class Flaky(MockBuyerPolicy):
    """Mock buyer whose service drops out once, on a given step."""

    def __init__(self, fail_step):
        super().__init__()
        self.fail_step = fail_step

    def decide(self, ctx, rng):
        if ctx.step == self.fail_step:
            self.fail_step = None
            raise ProviderUnavailable("connection reset")
        return super().decide(ctx, rng)


def test_checkpoint_and_resume(tmp_path):
    cfg = SimConfig(rng_seed=5, max_steps=12)
    clean = tmp_path / "clean"
    simulate(cfg, out_dir=clean)

    pol = dataclasses.replace(mock_policies(cfg), buyer_policy=Flaky(6), provider="flaky")
    out = tmp_path / "flaky"
    with pytest.raises(SimulationAborted) as info:
        Simulation(cfg, pol, out_dir=out).run()
    assert info.value.checkpoint == out / "checkpoint.pkl"
    assert '"status": "aborted"' in (out / "run_meta.json").read_text()

    resumed = Simulation.resume(info.value.checkpoint, cfg, pol, out_dir=out)
    assert resumed.state.step == 6
    resumed.run()
    for name in ("events.jsonl", "transactions.csv"):
        assert (out / name).read_bytes() == (clean / name).read_bytes()


def test_change_price_event():
    sim = started(SimConfig())
    seller = sim.state.sellers["S000002"]
    (did,) = seller.owned_datasets
    old = sim.state.listings[did].price
    sim._apply_seller_action(seller, SellerAction.change_price(did, 19.999), sim.entry_phase())
    sim.log.commit()
    ev = events_of(sim, "action")[-1]
    assert ev["action"] == SellerActionKind.CHANGE_PRICE.value
    assert (ev["old_price"], ev["new_price"]) == (old, 20.0)
