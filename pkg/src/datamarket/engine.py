"""The step loop: entry, seller phase, buyer phase, transaction phase.

Agents act in ascending id order inside each phase (or a seeded shuffle when
``agent_order="shuffled"``).  Policy decisions depend only on the acting
agent's own snapshot, so they may be computed concurrently
(``policy_workers > 1``); results are always applied in order.
"""

from __future__ import annotations

import csv
import json
import logging
import pickle
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from . import kernels
from .config import SimConfig
from .domain import (
    BuyerAction,
    BuyerActionKind,
    BuyerState,
    DatasetListing,
    DatasetMetadata,
    MarketState,
    Purchase,
    SellerAction,
    SellerActionKind,
    SellerState,
    Transaction,
    draw_budget,
    entry_rate,
    round_half_up,
    to_cents,
    validate_metadata,
)
from .policies.base import (
    BuyerContext,
    GenerationFailed,
    OwnedListing,
    PolicySet,
    SellerContext,
    TrendEntry,
    TrendSummary,
)
from .policies.llm import FALLBACK
from .rng import RngStreams, agent_number
from .vectorstore import Embedder, MockEmbedder, ProviderUnavailable, VectorStore

log = logging.getLogger(__name__)

SIMILARITY_DIGITS = 12
HISTORY_IN_CONTEXT = 40


class InitializationError(RuntimeError):
    pass


class SimulationAborted(RuntimeError):
    def __init__(self, message: str, checkpoint: Path | None):
        super().__init__(message)
        self.checkpoint = checkpoint


@dataclass(frozen=True)
class PurchaseRequest:
    buyer_id: str
    dataset_id: str
    quoted_price: float


@dataclass
class StepReport:
    step: int
    entrants: dict[str, list[str]] = field(default_factory=lambda: {"buyers": [], "sellers": []})
    actions: dict[str, str] = field(default_factory=dict)
    transactions: list[Transaction] = field(default_factory=list)
    exits: list[tuple[str, str]] = field(default_factory=list)

    @property
    def n_transactions(self) -> int:
        return len(self.transactions)


def buyer_exit_reason(
    analyze_count: int, buy_count: int, plan_streak: int, cfg: SimConfig
) -> str | None:
    """Rule-based buyer exit; both thresholds are strict."""
    if buy_count >= 1 and analyze_count / buy_count > cfg.buyer_ratio_threshold:
        return "analyze_buy_ratio"
    if plan_streak > cfg.plan_streak_threshold:
        return "plan_streak"
    return None


def seller_must_exit(unsold_steps: Sequence[int], cfg: SimConfig) -> bool:
    """True when every owned active listing has gone unsold long enough."""
    return bool(unsold_steps) and all(u >= cfg.seller_unsold_exit_steps for u in unsold_steps)


def trend_summary(state: MarketState, step: int, window: int, top_n: int) -> TrendSummary:
    """Most-sold datasets over the ``window`` steps before ``step``."""
    counts: dict[str, int] = {}
    for t in reversed(state.transactions):
        if t.step < step - window:
            break
        if t.step < step:
            counts[t.dataset_id] = counts.get(t.dataset_id, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    entries = []
    for did, n in ranked:
        listing = state.listings[did]
        entries.append(TrendEntry(listing.metadata.data_name, listing.metadata.tags[0], n))
    return TrendSummary(tuple(entries))


class EventLog:
    """Events are buffered per step and written when the step commits."""

    def __init__(self, path: Path | None = None):
        self.path = path
        self.events: list[dict[str, Any]] = []
        self._pending: list[dict[str, Any]] = []

    def emit(self, **event: Any) -> dict[str, Any]:
        self._pending.append(event)
        return event

    def commit(self) -> None:
        if self.path is not None and self._pending:
            with self.path.open("a", encoding="utf-8") as fh:
                for ev in self._pending:
                    fh.write(encode_event(ev) + "\n")
        self.events.extend(self._pending)
        self._pending = []

    def discard(self) -> None:
        self._pending = []


def encode_event(event: dict[str, Any]) -> str:
    return json.dumps(event, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class Simulation:
    def __init__(
        self,
        cfg: SimConfig,
        policies: PolicySet,
        embedder: Embedder | None = None,
        out_dir: str | Path | None = None,
        checkpoints: bool | None = None,
    ):
        self.cfg = cfg.validate()
        self.policies = policies
        self.embedder = embedder or MockEmbedder(cfg.embedding_dim)
        self.store = VectorStore(self.embedder.dim)
        self.state = MarketState()
        self.rng = RngStreams(cfg.rng_seed)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.log = EventLog(self.out_dir / "events.jsonl" if self.out_dir else None)
        self.initialized = False
        self.halted = False
        self._checkpoint: bytes | None = None
        # keep a step-start snapshot only where an external service can fail mid-step
        self.checkpoints = (
            checkpoints if checkpoints is not None else policies.provider not in ("mock", "scripted")
        )
        self._payloads: dict[str, tuple[int, list]] = {}
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

    # ------------------------------------------------------------ helpers

    @property
    def events(self) -> list[dict[str, Any]]:
        return self.log.events

    def _order(self, ids: list[str], phase: str) -> list[str]:
        ids = sorted(ids, key=agent_number)
        if self.cfg.agent_order == "shuffled":
            perm = self.rng.fresh("order:" + phase, self.state.step).permutation(len(ids))
            ids = [ids[i] for i in perm]
        return ids

    def _map(self, fn: Callable, items: list) -> list:
        if self.cfg.policy_workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(self.cfg.policy_workers) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]

    def _embed_listing(self, listing: DatasetListing) -> None:
        vec = self.embedder.embed(listing.metadata.embedding_text())
        self.store.upsert(listing.dataset_id, vec, listing.snapshot())

    def _add_listing(self, seller: SellerState, metadata: DatasetMetadata) -> DatasetListing:
        st = self.state
        st.n_datasets_created += 1
        listing = DatasetListing(
            dataset_id=f"D{st.n_datasets_created:06d}",
            seller_id=seller.seller_id,
            metadata=metadata,
            created_step=st.step,
        )
        st.listings[listing.dataset_id] = listing
        st.used_names.add(metadata.data_name)
        seller.owned_datasets.append(listing.dataset_id)
        self._embed_listing(listing)
        self.log.emit(
            type="listing",
            step=st.step,
            agent=seller.seller_id,
            dataset_id=listing.dataset_id,
            data_name=metadata.data_name,
            field=metadata.field_tag(self.cfg.fields) or metadata.tags[0],
            price=listing.price,
            update_frequency=metadata.update_frequency,
            version=listing.version,
        )
        return listing

    def _generate_listing_metadata(self, field: str, rng) -> DatasetMetadata:
        m = self.policies.data_generator.generate_metadata(field, self.state.used_names, rng)
        problems = validate_metadata(m, self.state.used_names, self.cfg.fields)
        if problems:
            raise GenerationFailed("; ".join(problems))
        return m

    def _new_seller(self, field: str, rng) -> SellerState | None:
        st = self.state
        metadata = self._generate_listing_metadata(field, rng)
        st.n_sellers_created += 1
        seller = SellerState(f"S{st.n_sellers_created:06d}", field, st.step)
        st.sellers[seller.seller_id] = seller
        self.log.emit(type="entry", step=st.step, role="seller", agent=seller.seller_id, field=field)
        self._add_listing(seller, metadata)
        return seller

    def _new_buyer(self, field: str, budget: float, goal: str, trend_draw: bool, conditioned: bool):
        st = self.state
        st.n_buyers_created += 1
        buyer = BuyerState(
            buyer_id=f"B{st.n_buyers_created:06d}",
            field=field,
            goal=goal,
            entered_step=st.step,
            budget_cents=to_cents(budget),
            trend_conditioned=conditioned,
        )
        st.buyers[buyer.buyer_id] = buyer
        self.log.emit(
            type="entry",
            step=st.step,
            role="buyer",
            agent=buyer.buyer_id,
            field=field,
            budget=buyer.budget,
            goal=goal,
            trend_draw=trend_draw,
            trend_conditioned=conditioned,
        )
        return buyer

    def _exit_seller(self, seller: SellerState, reason: str) -> None:
        seller.active = False
        for did in seller.owned_datasets:
            listing = self.state.listings[did]
            if listing.active:
                listing.active = False
                if not self.store.remove(did):
                    self.log.emit(type="warning", step=self.state.step, message=f"{did} not indexed")
        self.log.emit(
            type="exit", step=self.state.step, role="seller", agent=seller.seller_id, reason=reason
        )

    def _exit_buyer(self, buyer: BuyerState, reason: str) -> None:
        buyer.active = False
        self.log.emit(
            type="exit", step=self.state.step, role="buyer", agent=buyer.buyer_id, reason=reason
        )

    # ------------------------------------------------------------- phases

    def initialize(self) -> MarketState:
        if self.initialized:
            return self.state
        cfg, st = self.cfg, self.state
        fields_rng = self.rng.stream("fields")
        budgets_rng = self.rng.stream("budgets")
        for j in range(cfg.initial_sellers):
            field = cfg.fields[int(fields_rng.integers(len(cfg.fields)))]
            try:
                self._new_seller(field, self.rng.fresh("datagen", 0, j))
            except (GenerationFailed, ValueError) as exc:
                raise InitializationError(f"initial listing {j} could not be generated: {exc}") from exc
        for j in range(cfg.initial_buyers):
            field = cfg.fields[int(fields_rng.integers(len(cfg.fields)))]
            budget = draw_budget(budgets_rng, cfg.budget_levels)
            try:
                goal = self.policies.goal_generator.generate_goal(
                    field, None, self.rng.fresh("goal", 0, j)
                )
            except GenerationFailed as exc:
                raise InitializationError(f"initial goal {j} could not be generated: {exc}") from exc
            self._new_buyer(field, budget, goal, False, False)
        self.initialized = True
        return st

    def entry_phase(self, report: StepReport | None = None) -> StepReport:
        cfg, st = self.cfg, self.state
        report = report or StepReport(st.step)
        if st.step < 1:
            return report
        x = sum(st.step_volumes[-cfg.entry_window_steps :])
        rate = entry_rate(x, cfg)
        if cfg.entry_mode == "poisson":
            entry_rng = self.rng.stream("entry")
            n_buyers, n_sellers = int(entry_rng.poisson(rate)), int(entry_rng.poisson(rate))
        else:
            n_buyers = n_sellers = round_half_up(rate)

        fields_rng = self.rng.stream("fields")
        budgets_rng = self.rng.stream("budgets")
        trend_rng = self.rng.stream("trend")
        trends = None
        for j in range(n_buyers):
            field = cfg.fields[int(fields_rng.integers(len(cfg.fields)))]
            budget = draw_budget(budgets_rng, cfg.budget_levels)
            trend_draw = bool(trend_rng.random() < cfg.trend_probability)
            summary = None
            if trend_draw:
                if trends is None:
                    trends = trend_summary(st, st.step, cfg.trend_window_steps, cfg.trend_top_n)
                summary = trends or None
            try:
                goal = self.policies.goal_generator.generate_goal(
                    field, summary, self.rng.fresh("goal", st.step, j)
                )
            except GenerationFailed as exc:
                self.log.emit(
                    type="generation_failed", step=st.step, role="buyer", purpose="goal", error=str(exc)
                )
                continue
            buyer = self._new_buyer(field, budget, goal, trend_draw, summary is not None)
            report.entrants["buyers"].append(buyer.buyer_id)
        for j in range(n_sellers):
            field = cfg.fields[int(fields_rng.integers(len(cfg.fields)))]
            try:
                seller = self._new_seller(field, self.rng.fresh("datagen", st.step, j))
            except (GenerationFailed, ValueError) as exc:
                self.log.emit(
                    type="generation_failed", step=st.step, role="seller", purpose="metadata", error=str(exc)
                )
                continue
            report.entrants["sellers"].append(seller.seller_id)
        return report

    def _history(self, agent_id: str, actions) -> tuple:
        seen, cache = self._payloads.get(agent_id, (0, []))
        for s, a in actions[max(seen, len(actions) - HISTORY_IN_CONTEXT) :]:
            cache.append((s, a.payload()))
        cache = cache[-HISTORY_IN_CONTEXT:]
        self._payloads[agent_id] = (len(actions), cache)
        return tuple(cache)

    def seller_context(self, seller: SellerState) -> SellerContext:
        st = self.state
        owned = []
        for did in seller.owned_datasets:
            l = st.listings[did]
            if not l.active:
                continue
            owned.append(
                OwnedListing(
                    dataset_id=did,
                    data_name=l.metadata.data_name,
                    field=l.metadata.field_tag(self.cfg.fields) or l.metadata.tags[0],
                    price=l.price,
                    version=l.version,
                    update_frequency=l.metadata.update_frequency,
                    created_step=l.created_step,
                    last_updated_step=l.last_updated_step,
                    sales_count=l.sales_count,
                    consecutive_unsold_steps=l.consecutive_unsold_steps,
                )
            )
        sales = tuple(
            (t.step, t.dataset_id, t.price)
            for t in self.state.sales_by_seller.get(seller.seller_id, [])[-HISTORY_IN_CONTEXT:]
        )
        history = self._history(seller.seller_id, seller.action_history)
        return SellerContext(seller.seller_id, st.step, seller.revenue, tuple(owned), sales, history)

    def buyer_context(self, buyer: BuyerState) -> BuyerContext:
        history = self._history(buyer.buyer_id, buyer.action_history)
        return BuyerContext(
            buyer_id=buyer.buyer_id,
            step=self.state.step,
            goal=buyer.goal,
            field=buyer.field,
            budget=buyer.budget,
            purchases=tuple(buyer.purchases),
            plan_text=buyer.plan_text,
            last_search_results=tuple(buyer.last_search_results),
            action_history=history,
            analyze_count=buyer.analyze_count,
            consecutive_plan_count=buyer.consecutive_plan_count,
        )

    def _validate_seller_action(self, seller: SellerState, a: SellerAction) -> str | None:
        if not isinstance(a, SellerAction):
            return "not a seller action"
        if a.kind in (SellerActionKind.UPDATE_DATA, SellerActionKind.CHANGE_PRICE):
            listing = self.state.listings.get(a.dataset_id or "")
            if listing is None or listing.seller_id != seller.seller_id or not listing.active:
                return f"dataset {a.dataset_id!r} is not an active listing of this seller"
        if a.kind is SellerActionKind.CHANGE_PRICE:
            p = a.new_price
            if not isinstance(p, (int, float)) or p != p or to_cents(p) <= 0:
                return "new_price must be positive"
        if a.kind is SellerActionKind.PROVIDE_DATA and a.field not in self.cfg.fields:
            return f"field {a.field!r} is not configured"
        return None

    def seller_phase(self, report: StepReport | None = None) -> StepReport:
        st = self.state
        report = report or StepReport(st.step)
        order = self._order([s.seller_id for s in st.active_sellers()], "seller")
        acting, forced = [], set()
        for sid in order:
            seller = st.sellers[sid]
            unsold = [
                st.listings[d].consecutive_unsold_steps
                for d in seller.owned_datasets
                if st.listings[d].active
            ]
            if seller_must_exit(unsold, self.cfg):
                forced.add(sid)
            else:
                acting.append(sid)
        contexts = [self.seller_context(st.sellers[sid]) for sid in acting]
        decide = self.policies.seller_policy.decide
        actions = self._map(
            lambda ctx: decide(ctx, self.rng.lazy("seller", agent_number(ctx.seller_id), st.step)),
            contexts,
        )
        decided = dict(zip(acting, actions))
        for sid in order:
            seller = st.sellers[sid]
            if sid in forced:
                self._exit_seller(seller, "unsold_listings")
                report.exits.append((sid, "unsold_listings"))
                continue
            self._apply_seller_action(seller, decided[sid], report)
        return report

    def _apply_seller_action(self, seller: SellerState, action: SellerAction, report: StepReport):
        st = self.state
        if action.reasoning.startswith(FALLBACK):
            self.log.emit(type="fallback", step=st.step, role="seller", agent=seller.seller_id,
                          reason=action.reasoning[len(FALLBACK):])
        problem = self._validate_seller_action(seller, action)
        if problem:
            self.log.emit(
                type="downgrade",
                step=st.step,
                role="seller",
                agent=seller.seller_id,
                requested=action.payload() if isinstance(action, SellerAction) else repr(action),
                reason=problem,
            )
            action = SellerAction.do_nothing()
        seller.action_history.append((st.step, action))
        event = self.log.emit(type="action", step=st.step, role="seller", agent=seller.seller_id,
                              **action.payload())
        report.actions[seller.seller_id] = action.kind.value
        kind = action.kind
        if kind is SellerActionKind.UPDATE_DATA:
            listing = st.listings[action.dataset_id]
            listing.version += 1
            listing.last_updated_step = st.step
            self._embed_listing(listing)
            event["version"] = listing.version
        elif kind is SellerActionKind.CHANGE_PRICE:
            listing = st.listings[action.dataset_id]
            event["old_price"] = listing.price
            listing.set_price(action.new_price)
            event["new_price"] = listing.price
            self.store.update_snapshot(listing.dataset_id, listing.snapshot())
        elif kind is SellerActionKind.PROVIDE_DATA:
            rng = self.rng.fresh("provide", agent_number(seller.seller_id), st.step)
            try:
                metadata = self._generate_listing_metadata(action.field, rng)
            except (GenerationFailed, ValueError) as exc:
                self.log.emit(type="generation_failed", step=st.step, role="seller",
                              agent=seller.seller_id, purpose="metadata", error=str(exc))
            else:
                event["dataset_id"] = self._add_listing(seller, metadata).dataset_id
        elif kind is SellerActionKind.EXIT_MARKET:
            self._exit_seller(seller, "voluntary")
            report.exits.append((seller.seller_id, "voluntary"))

    def _validate_buyer_action(self, a: BuyerAction) -> str | None:
        if not isinstance(a, BuyerAction):
            return "not a buyer action"
        if a.kind in (BuyerActionKind.PLAN, BuyerActionKind.SEARCH) and not (a.text or "").strip():
            return f"{a.kind.value} needs non-empty text"
        if a.kind is BuyerActionKind.BUY:
            listing = self.state.listings.get(a.dataset_id or "")
            if listing is None or not listing.active:
                return f"dataset {a.dataset_id!r} is not an active listing"
        return None

    def buyer_phase(self, report: StepReport | None = None) -> list[PurchaseRequest]:
        st = self.state
        report = report or StepReport(st.step)
        order = self._order([b.buyer_id for b in st.active_buyers()], "buyer")
        contexts = [self.buyer_context(st.buyers[bid]) for bid in order]
        decide = self.policies.buyer_policy.decide
        actions = self._map(
            lambda ctx: decide(ctx, self.rng.lazy("buyer", agent_number(ctx.buyer_id), st.step)),
            contexts,
        )
        requests = []
        for bid, action in zip(order, actions):
            req = self._apply_buyer_action(st.buyers[bid], action, report)
            if req is not None:
                requests.append(req)
        return requests

    def _apply_buyer_action(self, buyer: BuyerState, action: BuyerAction, report: StepReport):
        st, cfg = self.state, self.cfg
        if action.reasoning.startswith(FALLBACK):
            self.log.emit(type="fallback", step=st.step, role="buyer", agent=buyer.buyer_id,
                          reason=action.reasoning[len(FALLBACK):])
        problem = self._validate_buyer_action(action)
        if problem:
            self.log.emit(
                type="downgrade",
                step=st.step,
                role="buyer",
                agent=buyer.buyer_id,
                requested=action.payload() if isinstance(action, BuyerAction) else repr(action),
                reason=problem,
            )
            action = BuyerAction.do_nothing()
        buyer.action_history.append((st.step, action))
        event = self.log.emit(type="action", step=st.step, role="buyer", agent=buyer.buyer_id,
                              **action.payload())
        report.actions[buyer.buyer_id] = action.kind.value
        kind = action.kind
        request = None
        if kind is BuyerActionKind.PLAN:
            buyer.plan_text = action.text
            buyer.consecutive_plan_count += 1
        else:
            buyer.consecutive_plan_count = 0
        if kind is BuyerActionKind.SEARCH:
            hits = self.store.search(self.embedder.embed(action.text), cfg.top_k_search)
            buyer.last_search_results = [
                {**h.listing.to_dict(), "similarity": round(h.similarity, SIMILARITY_DIGITS)}
                for h in hits
            ]
            event["hits"] = [[r["dataset_id"], r["similarity"]] for r in buyer.last_search_results]
        elif kind is BuyerActionKind.BUY:
            listing = st.listings[action.dataset_id]
            quoted = next(
                (r["price"] for r in buyer.last_search_results if r["dataset_id"] == listing.dataset_id),
                listing.price,
            )
            request = PurchaseRequest(buyer.buyer_id, listing.dataset_id, quoted)
        elif kind is BuyerActionKind.ANALYZE:
            buyer.analyze_count += 1
        elif kind is BuyerActionKind.EXIT_MARKET:
            self._exit_buyer(buyer, "voluntary")
            report.exits.append((buyer.buyer_id, "voluntary"))
            return None
        reason = buyer_exit_reason(
            buyer.analyze_count, buyer.buy_count, buyer.consecutive_plan_count, cfg
        )
        if reason:
            self._exit_buyer(buyer, reason)
            report.exits.append((buyer.buyer_id, reason))
        return request

    def transaction_phase(
        self, requests: Sequence[PurchaseRequest], report: StepReport | None = None
    ) -> list[Transaction]:
        st = self.state
        report = report or StepReport(st.step)
        executed = []
        sold = set()
        for req in sorted(requests, key=lambda r: agent_number(r.buyer_id)):
            buyer = st.buyers[req.buyer_id]
            listing = st.listings.get(req.dataset_id)
            reason = None
            if listing is None or not listing.active:
                reason = "listing inactive"
            elif buyer.budget_cents < listing.price_cents:
                reason = "insufficient budget"
            if reason:
                self.log.emit(type="purchase_rejected", step=st.step, agent=req.buyer_id,
                              dataset_id=req.dataset_id, reason=reason)
                continue
            seller = st.sellers[listing.seller_id]
            buyer.budget_cents -= listing.price_cents
            seller.revenue_cents += listing.price_cents
            listing.sales_count += 1
            sold.add(listing.dataset_id)
            tx = Transaction(st.step, buyer.buyer_id, seller.seller_id, listing.dataset_id,
                             listing.version, listing.price)
            buyer.purchases.append(Purchase(tx.dataset_id, tx.version, tx.step, tx.price))
            st.transactions.append(tx)
            st.sales_by_seller.setdefault(seller.seller_id, []).append(tx)
            executed.append(tx)
            self.log.emit(type="transaction", step=st.step, buyer=tx.buyer_id, seller=tx.seller_id,
                          dataset_id=tx.dataset_id, version=tx.version, price=tx.price,
                          quoted_price=req.quoted_price)
        for listing in st.listings.values():
            if not listing.active:
                continue
            if listing.dataset_id in sold:
                listing.consecutive_unsold_steps = 0
            else:
                listing.consecutive_unsold_steps += 1
        st.step_volumes.append(len(executed))
        report.transactions.extend(executed)
        return executed

    # ---------------------------------------------------------------- loop

    def step(self) -> StepReport:
        if not self.initialized:
            self.initialize()
        st = self.state
        report = StepReport(st.step)
        if self.checkpoints:
            self._checkpoint = pickle.dumps(self._resumable())
        try:
            self.entry_phase(report)
            self.seller_phase(report)
            requests = self.buyer_phase(report)
            executed = self.transaction_phase(requests, report)
        except ProviderUnavailable as exc:
            self.log.discard()
            path = self._write_checkpoint()
            raise SimulationAborted(f"external service failure at step {st.step}: {exc}", path) from exc
        self.log.emit(
            type="step_end",
            step=st.step,
            transactions=len(executed),
            active_buyers=len(st.active_buyers()),
            active_sellers=len(st.active_sellers()),
            active_listings=len(st.active_listings()),
        )
        self.log.commit()
        self._write_transactions(executed)
        st.step += 1
        if not st.active_buyers() and not st.active_sellers():
            self.halted = True
        return report

    def run(self) -> "RunResult":
        self._write_meta("running")
        if not self.initialized:
            self.initialize()
            self._write_transactions([])
        reports = []
        while self.state.step < self.cfg.max_steps and not self.halted:
            reports.append(self.step())
        self._write_meta("completed")
        return RunResult(self.state, self.events, reports)

    # ----------------------------------------------------- files and resume

    def _write_transactions(self, txs: Sequence[Transaction]) -> None:
        if self.out_dir is None:
            return
        path = self.out_dir / "transactions.csv"
        new = not path.exists()
        with path.open("a", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if new:
                w.writerow(Transaction.CSV_FIELDS)
            for t in txs:
                w.writerow(t.row())

    def meta(self, status: str) -> dict[str, Any]:
        return {
            "status": status,
            "seed": self.cfg.rng_seed,
            "steps_completed": self.state.step,
            "config": self.cfg.to_dict(),
            "policy_provider": self.policies.provider,
            "policy_details": self.policies.extra,
            "embedder": getattr(self.embedder, "name", type(self.embedder).__name__),
            "kernel_backend": kernels.BACKEND,
        }

    def _write_meta(self, status: str) -> None:
        if self.out_dir is None:
            return
        (self.out_dir / "run_meta.json").write_text(
            json.dumps(self.meta(status), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def _resumable(self) -> dict[str, Any]:
        return {"state": self.state, "rng": self.rng, "initialized": self.initialized}

    def _write_checkpoint(self) -> Path | None:
        if self._checkpoint is None:
            self._checkpoint = pickle.dumps(self._resumable())
        self._write_meta("aborted")
        if self.out_dir is None:
            return None
        path = self.out_dir / "checkpoint.pkl"
        path.write_bytes(self._checkpoint)
        return path

    @classmethod
    def resume(
        cls,
        checkpoint: str | Path,
        cfg: SimConfig,
        policies: PolicySet,
        embedder: Embedder | None = None,
        out_dir: str | Path | None = None,
    ) -> "Simulation":
        """Rebuild a simulation from a checkpoint written by an aborted run."""
        data = pickle.loads(Path(checkpoint).read_bytes())
        sim = cls(cfg, policies, embedder, out_dir)
        sim.state = data["state"]
        sim.rng = data["rng"]
        sim.initialized = data["initialized"]
        for listing in sim.state.listings.values():
            if listing.active:
                sim._embed_listing(listing)
        return sim


@dataclass
class RunResult:
    state: MarketState
    events: list[dict[str, Any]]
    reports: list[StepReport]

    @property
    def transactions(self) -> list[Transaction]:
        return self.state.transactions


def simulate(cfg: SimConfig, policies: PolicySet | None = None, out_dir=None, embedder=None) -> RunResult:
    from .policies.mock import mock_policies

    return Simulation(cfg, policies or mock_policies(cfg), embedder, out_dir).run()
