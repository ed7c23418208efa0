"""Embeddings and the exhaustive cosine-similarity store used by buyer search."""

from __future__ import annotations

import hashlib
import logging
import os
import re
import time
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Protocol

import httpx
import numpy as np

from . import kernels
from .domain import ListingSnapshot

log = logging.getLogger(__name__)


class EmptyTextError(ValueError):
    pass


class ProviderUnavailable(RuntimeError):
    """An external service failed; the caller may retry."""


class MissingCredential(RuntimeError):
    pass


class Embedder(Protocol):
    name: str
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


_STRIP = re.compile(r"^[^\w]+|[^\w]+$")


def tokenize(text: str) -> list[str]:
    tokens = []
    for raw in text.lower().split():
        tok = _STRIP.sub("", raw)
        if tok:
            tokens.append(tok)
    return tokens


TEXT_CACHE_SIZE = 4096


class MockEmbedder:
    """Deterministic bag-of-tokens embedder.

    Each whitespace token (lowercased, outer punctuation stripped) maps to a
    fixed pseudo-random unit vector seeded from its hash; a text embeds as the
    normalized sum of its token vectors.  Texts sharing tokens therefore land
    close together.
    """

    name = "mock"

    def __init__(self, dim: int = 256):
        self.dim = int(dim)
        self._cache: dict[str, np.ndarray] = {}
        self._texts: OrderedDict[str, np.ndarray] = OrderedDict()

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=16).digest()
            rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
            vec = rng.standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            self._cache[token] = vec
        return vec

    def embed(self, text: str) -> np.ndarray:
        hit = self._texts.get(text)
        if hit is not None:
            self._texts.move_to_end(text)
            return hit.copy()
        vec = self._embed(text)
        self._texts[text] = vec
        if len(self._texts) > TEXT_CACHE_SIZE:
            self._texts.popitem(last=False)
        return vec.copy()

    def _embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyTextError("cannot embed empty text")
        tokens = tokenize(text) or text.split()
        total = np.zeros(self.dim)
        for tok in tokens:
            total += self._token_vector(tok)
        norm = np.linalg.norm(total)
        if norm == 0.0:
            # only reachable with perfectly cancelling tokens
            total = self._token_vector(" ".join(tokens))
            norm = 1.0
        return total / norm


class HTTPEmbedder:
    """Embedding provider speaking the OpenAI ``/v1/embeddings`` wire format."""

    name = "http"

    def __init__(
        self,
        model: str,
        dim: int,
        endpoint: str = "https://api.openai.com/v1/embeddings",
        api_key_env: str = "DATAMARKET_LLM_API_KEY",
        retries: int = 3,
        backoff: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        key = os.environ.get(api_key_env)
        if not key:
            raise MissingCredential(f"credential missing: set {api_key_env}")
        self.model = model
        self.dim = int(dim)
        self.endpoint = endpoint
        self.retries = retries
        self.backoff = backoff
        self._client = httpx.Client(
            headers={"Authorization": f"Bearer {key}"}, timeout=60.0, transport=transport
        )

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyTextError("cannot embed empty text")
        body = {"model": self.model, "input": text, "dimensions": self.dim}
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._client.post(self.endpoint, json=body)
                resp.raise_for_status()
                vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
                if vec.shape != (self.dim,):
                    raise ProviderUnavailable(f"embedding has shape {vec.shape}")
                return vec
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last = exc
                if attempt < self.retries:
                    time.sleep(min(2.0**attempt, 30.0) * self.backoff)
        raise ProviderUnavailable(f"embedding service failed: {last}")


def make_embedder(cfg) -> Embedder:
    if cfg.embedder == "http":
        return HTTPEmbedder(
            model=cfg.embedding_model, dim=cfg.embedding_dim, api_key_env=cfg.llm_api_key_env
        )
    return MockEmbedder(cfg.embedding_dim)


@dataclass(frozen=True)
class SearchHit:
    dataset_id: str
    similarity: float
    listing: ListingSnapshot | Any = None

    def to_dict(self) -> dict[str, Any]:
        snap = self.listing.to_dict() if hasattr(self.listing, "to_dict") else self.listing
        return {"dataset_id": self.dataset_id, "similarity": self.similarity, "listing": snap}


def _unit(v, dim: int | None) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or (dim is not None and v.shape[0] != dim):
        raise ValueError(f"expected a vector of length {dim}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("zero vector")
    return v / norm


class VectorStore:
    """Exhaustive cosine-similarity index keyed by dataset id.

    Vectors are normalized on the way in, so a search is one matrix-vector
    product over all rows.  Rows are kept in ascending id order, which is what
    makes the tie-break (lower id first) fall out of a stable ranking.
    """

    def __init__(self, dim: int | None = None):
        self.dim = dim
        self._vectors: dict[str, np.ndarray] = {}
        self._snapshots: dict[str, Any] = {}
        self._ids: list[str] | None = None
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, dataset_id: str) -> bool:
        return dataset_id in self._vectors

    def ids(self) -> list[str]:
        return sorted(self._vectors)

    def upsert(self, dataset_id: str, vector, snapshot: Any = None) -> None:
        unit = _unit(vector, self.dim)
        if self.dim is None:
            self.dim = unit.shape[0]
        self._vectors[dataset_id] = unit
        self._snapshots[dataset_id] = snapshot
        self._matrix = None

    def update_snapshot(self, dataset_id: str, snapshot: Any) -> None:
        if dataset_id not in self._vectors:
            raise KeyError(dataset_id)
        self._snapshots[dataset_id] = snapshot

    def remove(self, dataset_id: str) -> bool:
        """Drop an id; unknown ids are a logged no-op.  Returns whether it existed."""
        if dataset_id not in self._vectors:
            log.warning("remove of unknown dataset id %s ignored", dataset_id)
            return False
        del self._vectors[dataset_id]
        del self._snapshots[dataset_id]
        self._matrix = None
        return True

    def _rebuild(self) -> None:
        self._ids = sorted(self._vectors)
        if self._ids:
            self._matrix = np.vstack([self._vectors[i] for i in self._ids])
        else:
            self._matrix = np.empty((0, self.dim or 0))

    def search(self, query, top_k: int) -> list[SearchHit]:
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        q = _unit(query, self.dim)
        if not self._vectors:
            return []
        if self._matrix is None:
            self._rebuild()
        idx, sims = kernels.cosine_topk(self._matrix, q, top_k)
        hits = []
        for i, s in zip(idx.tolist(), sims.tolist()):
            did = self._ids[i]
            hits.append(SearchHit(did, max(-1.0, min(1.0, s)), self._snapshots[did]))
        return hits
