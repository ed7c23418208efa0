"""Text-completion backed policies, transport, transcripts and replay."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from collections import defaultdict, deque
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol

import httpx
import jsonschema

from ..config import SimConfig
from ..domain import (
    BuyerAction,
    BuyerActionKind,
    DatasetMetadata,
    SellerAction,
    SellerActionKind,
    to_cents,
    validate_metadata,
)
from ..vectorstore import MissingCredential, ProviderUnavailable
from .base import BuyerContext, GenerationFailed, PolicySet, SellerContext, TrendSummary
from .prompts import (
    SCHEMAS,
    PromptBundle,
    buyer_prompt,
    data_generator_prompt,
    goal_prompt,
    seller_prompt,
)

log = logging.getLogger(__name__)

FALLBACK = "[fallback] "


class CompletionClient(Protocol):
    name: str

    def send(self, system: str, user: str, schema_id: str) -> str: ...


class ReplayMismatch(ProviderUnavailable):
    pass


def prompt_key(schema_id: str, system: str, user: str) -> str:
    h = hashlib.sha256()
    for part in (schema_id, system, user):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


class TranscriptLog:
    """Append-only JSONL record of every request/response exchange."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self.entries: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    def record(self, **entry: Any) -> None:
        with self._lock:
            entry = {"seq": len(self.entries), **entry}
            self.entries.append(entry)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")


class HTTPCompletionClient:
    """Chat-completions client (OpenAI wire format) with transport retries."""

    name = "http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str,
        transport_retries: int = 3,
        backoff: float = 1.0,
        transport: httpx.BaseTransport | None = None,
    ):
        key = os.environ.get(api_key_env)
        if not key:
            raise MissingCredential(f"credential missing: set {api_key_env}")
        self.endpoint = endpoint
        self.model = model
        self.transport_retries = transport_retries
        self.backoff = backoff
        self._client = httpx.Client(
            headers={"Authorization": f"Bearer {key}"}, timeout=120.0, transport=transport
        )

    def send(self, system: str, user: str, schema_id: str) -> str:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "response_format": {"type": "json_object"},
        }
        last: Exception | None = None
        for attempt in range(self.transport_retries + 1):
            try:
                resp = self._client.post(self.endpoint, json=body)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last = exc
                if attempt < self.transport_retries:
                    time.sleep(self.backoff * 2**attempt)
        raise ProviderUnavailable(f"completion service failed: {last}")


class ReplayClient:
    """Serves responses recorded in a transcript, matched by exact prompt."""

    name = "replay"

    def __init__(self, transcript: str | Path | Iterable[dict[str, Any]]):
        if isinstance(transcript, (str, Path)):
            with open(transcript, encoding="utf-8") as fh:
                entries = [json.loads(line) for line in fh if line.strip()]
        else:
            entries = list(transcript)
        self._queues: dict[str, deque[str]] = defaultdict(deque)
        for e in sorted(entries, key=lambda e: e.get("seq", 0)):
            key = prompt_key(e["schema"], e["system"], e["user"])
            self._queues[key].append(e["response"])
        self._lock = threading.Lock()

    def send(self, system: str, user: str, schema_id: str) -> str:
        key = prompt_key(schema_id, system, user)
        with self._lock:
            queue = self._queues.get(key)
            if not queue:
                raise ReplayMismatch("no recorded response for this prompt")
            return queue.popleft()


_FENCE = re.compile(r"^```(?:json)?\s*|\s*```$", re.MULTILINE)


def parse_json_object(text: str) -> dict[str, Any]:
    body = _FENCE.sub("", text.strip())
    start, end = body.find("{"), body.rfind("}")
    if start < 0 or end < start:
        raise ValueError("no JSON object in response")
    obj = json.loads(body[start : end + 1])
    if not isinstance(obj, dict):
        raise ValueError("response is not a JSON object")
    return obj


def complete(
    bundle: PromptBundle,
    client: CompletionClient,
    retry_limit: int = 3,
    transcript: TranscriptLog | None = None,
    validate: Callable[[dict[str, Any]], str | None] | None = None,
) -> dict[str, Any]:
    """Ask ``client`` for a JSON object matching ``bundle.expected_schema``.

    A response that does not parse, fails the schema or fails ``validate``
    (which returns an error message or ``None``) is re-asked with the error
    appended, at most ``retry_limit`` times.  Transport errors propagate.
    """
    schema = SCHEMAS[bundle.expected_schema]
    user = bundle.user_prompt
    error = None
    for attempt in range(retry_limit + 1):
        if error is not None:
            user = (
                bundle.user_prompt
                + f"\n\n# Your previous reply was rejected\n{error}\nReply again with a valid JSON object."
            )
        raw = client.send(bundle.system_prompt, user, bundle.expected_schema)
        try:
            obj = parse_json_object(raw)
            jsonschema.validate(obj, schema)
            error = validate(obj) if validate else None
        except (ValueError, jsonschema.ValidationError) as exc:
            error = getattr(exc, "message", None) or str(exc)
        if transcript is not None:
            transcript.record(
                schema=bundle.expected_schema,
                system=bundle.system_prompt,
                user=user,
                response=raw,
                attempt=attempt,
                ok=error is None,
                error=error,
            )
        if error is None:
            if obj.get("reasoning"):
                log.debug("reasoning: %s", obj["reasoning"])
            return obj
    raise GenerationFailed(
        f"no valid {bundle.expected_schema} after {retry_limit + 1} attempts: {error}"
    )


class LLMDataGenerator:
    def __init__(self, client, fields, retry_limit=3, transcript=None):
        self.client = client
        self.fields = tuple(fields)
        self.retry_limit = retry_limit
        self.transcript = transcript

    def _metadata(self, obj, field) -> DatasetMetadata:
        m = DatasetMetadata.from_dict(obj)
        tags = tuple(t.strip() for t in m.tags if t and t.strip())
        if field not in tags:
            tags = (field,) + tags
        return DatasetMetadata(
            m.data_name, m.description, m.columns, tags, m.data_price, m.update_frequency
        )

    def generate_metadata(self, field, existing_names, rng=None) -> DatasetMetadata:
        if field not in self.fields:
            raise ValueError(f"field {field!r} is not configured")
        existing = set(existing_names)

        def check(obj):
            try:
                problems = validate_metadata(self._metadata(obj, field), existing, self.fields)
            except (KeyError, TypeError, ValueError) as exc:
                return f"metadata does not parse: {exc}"
            return "; ".join(problems) or None

        obj = complete(
            data_generator_prompt(field, existing), self.client, self.retry_limit, self.transcript, check
        )
        return self._metadata(obj, field)


class LLMGoalGenerator:
    def __init__(self, client, retry_limit=3, transcript=None):
        self.client = client
        self.retry_limit = retry_limit
        self.transcript = transcript

    def generate_goal(self, field, trends: TrendSummary | None, rng=None) -> str:
        def check(obj):
            return None if obj["analysis_purpose"].strip() else "analysis_purpose is empty"

        obj = complete(goal_prompt(field, trends), self.client, self.retry_limit, self.transcript, check)
        return obj["analysis_purpose"].strip()


class LLMSellerPolicy:
    def __init__(self, client, retry_limit=3, transcript=None):
        self.client = client
        self.retry_limit = retry_limit
        self.transcript = transcript

    @staticmethod
    def _check(ctx: SellerContext, obj) -> str | None:
        kind = obj["action"]
        owned = {l.dataset_id for l in ctx.listings}
        if kind in ("update_data", "change_price"):
            if obj.get("dataset_id") not in owned:
                return f"dataset_id must be one of your datasets: {sorted(owned)}"
        if kind == "change_price":
            price = obj.get("new_price")
            if not isinstance(price, (int, float)) or not math.isfinite(price) or to_cents(price) <= 0:
                return "change_price needs a positive new_price"
        if kind == "provide_data" and not ctx.listings:
            return "provide_data needs an owned dataset to take the field from"
        return None

    def decide(self, ctx: SellerContext, rng=None) -> SellerAction:
        try:
            obj = complete(
                seller_prompt(ctx),
                self.client,
                self.retry_limit,
                self.transcript,
                lambda o: self._check(ctx, o),
            )
        except GenerationFailed as exc:
            return SellerAction.do_nothing(FALLBACK + str(exc))
        kind = SellerActionKind(obj["action"])
        why = obj.get("reasoning", "")
        if kind is SellerActionKind.UPDATE_DATA:
            return SellerAction.update_data(obj["dataset_id"], why)
        if kind is SellerActionKind.CHANGE_PRICE:
            return SellerAction.change_price(obj["dataset_id"], float(obj["new_price"]), why)
        if kind is SellerActionKind.PROVIDE_DATA:
            first = sorted(ctx.listings, key=lambda l: l.dataset_id)[0]
            return SellerAction.provide_data(first.field, why)
        if kind is SellerActionKind.EXIT_MARKET:
            return SellerAction.exit_market(why)
        return SellerAction.do_nothing(why)


class LLMBuyerPolicy:
    def __init__(self, client, retry_limit=3, transcript=None, subscription=False):
        self.client = client
        self.retry_limit = retry_limit
        self.transcript = transcript
        self.subscription = subscription

    @staticmethod
    def _check(obj) -> str | None:
        kind = obj["action"]
        if kind == "plan" and not str(obj.get("plan", "")).strip():
            return "plan needs a non-empty 'plan' text"
        if kind == "search" and not str(obj.get("query", "")).strip():
            return "search needs a non-empty 'query'"
        if kind == "buy" and not str(obj.get("dataset_id", "")).strip():
            return "buy needs a 'dataset_id'"
        return None

    def decide(self, ctx: BuyerContext, rng=None) -> BuyerAction:
        try:
            obj = complete(
                buyer_prompt(ctx, self.subscription),
                self.client,
                self.retry_limit,
                self.transcript,
                self._check,
            )
        except GenerationFailed as exc:
            return BuyerAction.do_nothing(FALLBACK + str(exc))
        kind = BuyerActionKind(obj["action"])
        why = obj.get("reasoning", "")
        if kind is BuyerActionKind.PLAN:
            return BuyerAction.plan(obj["plan"].strip(), why)
        if kind is BuyerActionKind.SEARCH:
            return BuyerAction.search(obj["query"].strip(), why)
        if kind is BuyerActionKind.BUY:
            return BuyerAction.buy(obj["dataset_id"].strip(), why)
        if kind is BuyerActionKind.ANALYZE:
            return BuyerAction.analyze(why)
        if kind is BuyerActionKind.EXIT_MARKET:
            return BuyerAction.exit_market(why)
        return BuyerAction.do_nothing(why)


def llm_policies(cfg: SimConfig, client: CompletionClient, transcript: TranscriptLog | None) -> PolicySet:
    n = cfg.llm_retry_limit
    return PolicySet(
        data_generator=LLMDataGenerator(client, cfg.fields, n, transcript),
        goal_generator=LLMGoalGenerator(client, n, transcript),
        seller_policy=LLMSellerPolicy(client, n, transcript),
        buyer_policy=LLMBuyerPolicy(client, n, transcript, cfg.subscription_prompt),
        provider=getattr(client, "name", "llm"),
        extra={"model": cfg.llm_model, "endpoint": cfg.llm_endpoint},
    )
