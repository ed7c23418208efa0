"""Normalize external order records into the engine's transaction schema.

Each valid record becomes one transaction: the payer is the buyer, the
datatoken is both the dataset and (as an ownership proxy) the seller, the
step is the time bin counted from the earliest record, and version is 1.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

from .domain import Transaction

log = logging.getLogger(__name__)

RAW_FIELDS = (
    "order_id",
    "transaction_hash",
    "datatoken_address",
    "payer_address",
    "amount",
    "price",
    "timestamp",
)
_UNITS = {"s": 1, "m": 60, "h": 3600, "d": 86400, "w": 604800}


class IngestError(ValueError):
    pass


def parse_bin_width(text: str | float | int) -> float:
    """``"1d"``, ``"12h"``, ``"30m"``, ``"3600s"`` or a plain number of seconds."""
    if isinstance(text, (int, float)):
        seconds = float(text)
    else:
        m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+)\s*([smhdw]?)\s*", str(text).lower())
        if not m:
            raise IngestError(f"bad bin width {text!r}; use e.g. 1d, 12h, 3600s")
        seconds = float(m.group(1)) * _UNITS[m.group(2) or "s"]
    if not math.isfinite(seconds) or seconds <= 0:
        raise IngestError(f"bin width must be positive, got {text!r}")
    return seconds


def parse_timestamp(value: Any) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        ts = float(value)
    else:
        s = str(value).strip()
        try:
            ts = float(s)
        except ValueError:
            dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
            if dt.tzinfo is None:
                dt = dt.replace(tzinfo=timezone.utc)
            ts = dt.timestamp()
    if not math.isfinite(ts):
        raise ValueError("timestamp is not finite")
    return ts


def _number(value: Any, name: str) -> float:
    x = float(value)
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"{name} must be a non-negative number")
    return x


@dataclass(frozen=True)
class RawRecord:
    line: int
    order_id: str
    transaction_hash: str
    datatoken_address: str
    payer_address: str
    amount: float
    price: float
    timestamp: float


@dataclass
class IngestResult:
    transactions: list[Transaction]
    records: list[RawRecord]
    dropped: list[tuple[int, str]] = field(default_factory=list)
    bin_width: float = 86400.0
    t0: float = 0.0

    @property
    def n_steps(self) -> int:
        return max(t.step for t in self.transactions) + 1

    def meta(self, source: str | None = None) -> dict[str, Any]:
        return {
            "source": source,
            "bin_width_seconds": self.bin_width,
            "t0": self.t0,
            "n_steps": self.n_steps,
            "n_valid": len(self.transactions),
            "n_dropped": len(self.dropped),
            "dropped": [{"line": n, "reason": r} for n, r in self.dropped],
            "seller_id_proxy": "datatoken_address",
        }


def _rows(path: Path, fmt: str) -> Iterator[tuple[int, Any]]:
    with path.open(newline="" if fmt == "csv" else None, encoding="utf-8") as fh:
        if fmt == "csv":
            reader = csv.DictReader(fh)
            missing = [f for f in RAW_FIELDS if f not in (reader.fieldnames or [])]
            if missing:
                raise IngestError(f"{path}:1: header lacks {', '.join(missing)}")
            for row in reader:
                yield reader.line_num, row
        else:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    yield n, json.loads(line)
                except json.JSONDecodeError as exc:
                    yield n, ValueError(f"invalid JSON: {exc.msg}")


def _record(line: int, row: Any) -> RawRecord:
    if isinstance(row, Exception):
        raise row
    if not isinstance(row, dict):
        raise ValueError("record is not an object")
    missing = [f for f in RAW_FIELDS if row.get(f) in (None, "")]
    if missing:
        raise ValueError(f"missing {', '.join(missing)}")
    return RawRecord(
        line=line,
        order_id=str(row["order_id"]).strip(),
        transaction_hash=str(row["transaction_hash"]).strip(),
        datatoken_address=str(row["datatoken_address"]).strip(),
        payer_address=str(row["payer_address"]).strip(),
        amount=_number(row["amount"], "amount"),
        price=_number(row["price"], "price"),
        timestamp=parse_timestamp(row["timestamp"]),
    )


def detect_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    return "csv"


def ingest(path: str | Path, bin_width: str | float = "1d", fmt: str | None = None) -> IngestResult:
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"{path}: no such file")
    fmt = fmt or detect_format(path)
    if fmt not in ("csv", "jsonl"):
        raise IngestError(f"unknown format {fmt!r}")
    width = parse_bin_width(bin_width)
    records: list[RawRecord] = []
    dropped: list[tuple[int, str]] = []
    seen: set[str] = set()
    for line, row in _rows(path, fmt):
        try:
            rec = _record(line, row)
        except (ValueError, TypeError) as exc:
            dropped.append((line, str(exc)))
            log.warning("%s:%d: dropped: %s", path, line, exc)
            continue
        if rec.order_id in seen:
            dropped.append((line, f"duplicate order_id {rec.order_id}"))
            log.warning("%s:%d: dropped duplicate order_id %s", path, line, rec.order_id)
            continue
        seen.add(rec.order_id)
        records.append(rec)
    if not records:
        raise IngestError(f"{path}: no valid records ({len(dropped)} dropped)")
    t0 = min(r.timestamp for r in records)
    ordered = sorted(records, key=lambda r: (r.timestamp, r.line))
    txs = [
        Transaction(
            step=int(math.floor((r.timestamp - t0) / width)),
            buyer_id=r.payer_address,
            seller_id=r.datatoken_address,
            dataset_id=r.datatoken_address,
            version=1,
            price=r.price,
        )
        for r in ordered
    ]
    return IngestResult(txs, ordered, dropped, width, t0)
