"""Reading run outputs back: transactions.csv, events.jsonl, run_meta.json."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .domain import Transaction


class LogFormatError(ValueError):
    """A log file could not be parsed; the message names the first bad line."""


def read_transactions(path: str | Path) -> list[Transaction]:
    path = Path(path)
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise LogFormatError(f"{path}: empty file, expected a header line")
        if tuple(h.strip() for h in header) != Transaction.CSV_FIELDS:
            raise LogFormatError(
                f"{path}:1: header must be {','.join(Transaction.CSV_FIELDS)}, got {','.join(header)}"
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(Transaction.CSV_FIELDS):
                raise LogFormatError(f"{path}:{line}: expected 6 columns, got {len(row)}")
            step, buyer, seller, dataset, version, price = row
            try:
                tx = Transaction(int(step), buyer, seller, dataset, int(version), float(price))
            except ValueError as exc:
                raise LogFormatError(f"{path}:{line}: {exc}") from None
            if tx.step < 0 or not math.isfinite(tx.price) or tx.price < 0 or not (buyer and seller and dataset):
                raise LogFormatError(f"{path}:{line}: invalid transaction {row}")
            out.append(tx)
    return out


def write_transactions(path: str | Path, transactions) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(Transaction.CSV_FIELDS)
        for t in transactions:
            w.writerow(t.row())


def read_events(path: str | Path) -> list[dict[str, Any]]:
    path = Path(path)
    events = []
    with path.open(encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                ev = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(f"{path}:{n}: {exc.msg}") from None
            if not isinstance(ev, dict) or "type" not in ev:
                raise LogFormatError(f"{path}:{n}: event must be an object with a 'type'")
            events.append(ev)
    return events


@dataclass
class RunLog:
    transactions: list[Transaction]
    events: list[dict[str, Any]] | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n_steps(self) -> int | None:
        n = self.meta.get("steps_completed")
        if n is None:
            n = self.meta.get("n_steps")
        if n is None and self.transactions:
            n = max(t.step for t in self.transactions) + 1
        return n

    @property
    def fields(self) -> list[str]:
        cfg = self.meta.get("config", {})
        return list(cfg.get("market", {}).get("fields", []))

    def dataset_fields(self) -> dict[str, str]:
        return {
            ev["dataset_id"]: ev["field"]
            for ev in self.events or []
            if ev.get("type") == "listing"
        }


def load_log(path: str | Path) -> RunLog:
    """Load a run directory or a bare ``transactions.csv``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file or directory")
    if path.is_file():
        return RunLog(read_transactions(path))
    tx_path = path / "transactions.csv"
    if not tx_path.exists():
        raise LogFormatError(f"{path}: no transactions.csv")
    events_path = path / "events.jsonl"
    meta = {}
    for name in ("run_meta.json", "ingest_meta.json"):
        if (path / name).exists():
            try:
                meta = json.loads((path / name).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise LogFormatError(f"{path / name}:{exc.lineno}: {exc.msg}") from None
            break
    return RunLog(
        read_transactions(tx_path),
        read_events(events_path) if events_path.exists() else None,
        meta,
    )
