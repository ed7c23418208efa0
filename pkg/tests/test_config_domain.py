import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from datamarket.config import ConfigError, SimConfig, load_config
from datamarket.domain import (
    BuyerAction,
    DatasetListing,
    DatasetMetadata,
    SellerAction,
    draw_budget,
    entry_rate,
    round_half_up,
    to_cents,
    validate_metadata,
)
from datamarket.rng import RngStreams, agent_number


def meta(**kw):
    base = dict(
        data_name="traffic_counts",
        description="Hourly counts",
        columns=("id", "hour", "count"),
        tags=("urban planning",),
        data_price=120.0,
        update_frequency="high",
    )
    base.update(kw)
    return DatasetMetadata(**base)


class TestConfig:
    def test_defaults(self):
        cfg = SimConfig()
        assert (cfg.initial_buyers, cfg.initial_sellers, cfg.max_steps) == (10, 5, 40)
        assert cfg.budget_levels == (1000.0, 10000.0, 100000.0)
        assert (cfg.entry_L, cfg.entry_k, cfg.entry_x0) == (50.0, 0.03, 100.0)
        assert cfg.top_k_search == 20 and cfg.llm_retry_limit == 3
        assert cfg.seller_unsold_exit_steps == 10
        assert cfg.trend_probability == 0.5
        assert len(cfg.fields) == 10

    def test_yaml_roundtrip(self, tmp_path):
        cfg = SimConfig(rng_seed=5, fields=("a", "b"), entry_mode="poisson")
        p = tmp_path / "c.yaml"
        p.write_text(cfg.to_yaml())
        assert load_config(p) == cfg
        assert load_config("default") == SimConfig()
        assert load_config(None) == SimConfig()

    def test_shipped_default_file_matches(self):
        from pathlib import Path

        path = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"
        assert load_config(path) == SimConfig()

    @pytest.mark.parametrize(
        "change",
        [
            {"initial_buyers": -1},
            {"max_steps": 0},
            {"trend_probability": 1.5},
            {"entry_mode": "random"},
            {"agent_order": "descending"},
            {"top_k_search": 0},
            {"budget_levels": ()},
            {"fields": ()},
            {"entry_L": float("nan")},
        ],
    )
    def test_invalid(self, change):
        with pytest.raises(ConfigError):
            SimConfig(**change).validate()

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            SimConfig.from_dict({"market": {"initial_buyer": 3}})
        with pytest.raises(ConfigError):
            SimConfig.from_dict({"nonsense": {}})


class TestEntryRate:
    def test_midpoint_and_origin(self):
        cfg = SimConfig()
        assert entry_rate(100, cfg) == 25.0
        assert entry_rate(0, cfg) == pytest.approx(2.371294, abs=1e-6)

    def test_saturates(self):
        cfg = SimConfig()
        assert entry_rate(10_000, cfg) == pytest.approx(50.0)
        assert entry_rate(-1e6, cfg) >= 0.0

    @given(st.floats(-1e4, 1e4))
    def test_monotone_bounded(self, x):
        cfg = SimConfig()
        r = entry_rate(x, cfg)
        assert 0.0 <= r <= cfg.entry_L
        assert entry_rate(x + 1, cfg) >= r

    def test_round_half_up(self):
        assert [round_half_up(v) for v in (0.49, 0.5, 1.5, 2.5, 2.37)] == [0, 1, 2, 3, 2]


class TestMoney:
    def test_cents(self):
        assert to_cents(12.34) == 1234
        assert to_cents(0.1 + 0.2) == 30

    def test_listing_price_in_cents(self):
        listing = DatasetListing("D000001", "S000001", meta(data_price=19.999), 0)
        assert listing.price_cents == 2000
        assert listing.price == 20.0
        listing.set_price(7.5)
        assert listing.metadata.data_price == 7.5 and listing.snapshot().price == 7.5


class TestMetadata:
    def test_valid(self):
        assert validate_metadata(meta(), {"other"}, ["urban planning", "sports"]) == []

    @pytest.mark.parametrize(
        "kw, problem",
        [
            ({"data_name": " "}, "empty name"),
            ({"data_name": "taken"}, "duplicate name"),
            ({"data_price": 0.0}, "non-positive price"),
            ({"data_price": float("inf")}, "non-finite price"),
            ({"update_frequency": "hourly"}, "bad update_frequency"),
            ({"columns": ()}, "empty columns"),
            ({"columns": ("a", "")}, "empty column name"),
            ({"tags": ("sports", "urban planning")}, "tags must contain exactly one field tag"),
            ({"tags": ("misc",)}, "tags must contain exactly one field tag"),
        ],
    )
    def test_violations(self, kw, problem):
        assert problem in validate_metadata(meta(**kw), {"taken"}, ["urban planning", "sports"])

    def test_string_lists_split(self):
        m = meta(columns="a, b ,c", tags="sports")
        assert m.columns == ("a", "b", "c") and m.tags == ("sports",)

    def test_dict_roundtrip(self):
        assert DatasetMetadata.from_dict(meta().to_dict()) == meta()


class TestActions:
    def test_payloads(self):
        assert BuyerAction.plan("p").payload() == {"action": "plan", "plan": "p"}
        assert BuyerAction.search("q").payload() == {"action": "search", "query": "q"}
        assert BuyerAction.search("q").query == "q" and BuyerAction.plan("p").query is None
        assert BuyerAction.buy("D1").payload() == {"action": "buy", "dataset_id": "D1"}
        assert SellerAction.change_price("D1", 5.0).payload() == {
            "action": "change_price",
            "dataset_id": "D1",
            "new_price": 5.0,
        }
        assert SellerAction.provide_data("sports").payload() == {"action": "provide_data", "field": "sports"}


class TestRng:
    def test_fresh_is_reproducible_and_keyed(self):
        r = RngStreams(3)
        a = r.fresh("buyer", 1, 2).random(4)
        assert np.array_equal(a, RngStreams(3).fresh("buyer", 1, 2).random(4))
        assert not np.array_equal(a, r.fresh("buyer", 2, 1).random(4))
        assert not np.array_equal(a, r.fresh("seller", 1, 2).random(4))

    def test_stream_advances(self):
        r = RngStreams(0)
        assert r.stream("x").random() != r.stream("x").random()

    def test_lazy_matches_fresh(self):
        r = RngStreams(9)
        assert r.lazy("n", 4).random() == r.fresh("n", 4).random()

    def test_negative_seed(self):
        assert 0 <= RngStreams(-5).fresh("a").random() < 1

    def test_budget_uniform(self):
        rng = np.random.default_rng(0)
        draws = [draw_budget(rng, (1.0, 2.0, 3.0)) for _ in range(30_000)]
        for level in (1.0, 2.0, 3.0):
            share = draws.count(level) / len(draws)
            assert abs(share - 1 / 3) < 4 * math.sqrt((1 / 3) * (2 / 3) / len(draws))

    def test_agent_number(self):
        assert agent_number("B000042") == 42
