"""Command-line entry points: simulate, analyze, ingest, compare."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .engine import InitializationError, Simulation, SimulationAborted
from .ingest import IngestError, ingest
from .logio import LogFormatError, load_log, write_transactions
from .metrics import EmptyLogError, SchemaMismatchError, build_report, compare, figure_tables
from .policies import HTTPCompletionClient, ReplayClient, TranscriptLog, llm_policies, mock_policies
from .vectorstore import MissingCredential, ProviderUnavailable, make_embedder

log = logging.getLogger("datamarket")

RUN_FILES = ("events.jsonl", "transactions.csv", "run_meta.json", "checkpoint.pkl")


class CLIError(Exception):
    pass


def _prepare_out(out: Path, overwrite: bool, names=RUN_FILES) -> None:
    out.mkdir(parents=True, exist_ok=True)
    present = [n for n in names if (out / n).exists()]
    if present and not overwrite:
        raise CLIError(f"{out} already holds {', '.join(present)}; pass --overwrite to replace")
    for n in present:
        (out / n).unlink()


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    if args.steps is not None:
        cfg = cfg.replace(max_steps=args.steps)
    cfg.validate()
    out = Path(args.out)
    if args.policy == "mock":
        policies = mock_policies(cfg)
    else:
        if args.policy == "replay":
            if not args.transcript:
                raise CLIError("--policy replay needs --transcript")
            client = ReplayClient(args.transcript)
            transcript = None
        else:
            client = HTTPCompletionClient(cfg.llm_endpoint, cfg.llm_model, cfg.llm_api_key_env)
            transcript = TranscriptLog(args.transcript or out / "transcript.jsonl")
        policies = llm_policies(cfg, client, transcript)
    embedder = make_embedder(cfg)
    if args.resume:
        sim = Simulation.resume(args.resume, cfg, policies, embedder, out)
    else:
        _prepare_out(out, args.overwrite)
        sim = Simulation(cfg, policies, embedder, out)
    result = sim.run()
    st = result.state
    print(
        f"{st.step} steps, {len(st.transactions)} transactions, "
        f"{st.n_buyers_created} buyers, {st.n_sellers_created} sellers -> {out}"
    )
    return 0


def _write_csv(path: Path, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def cmd_analyze(args) -> int:
    run = load_log(args.log)
    report = build_report(
        run.transactions,
        n_steps=run.n_steps,
        dataset_fields=run.dataset_fields(),
        fields=run.fields,
        events=run.events,
        weighted_trend=not args.unweighted,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(report.to_json(), encoding="utf-8")
    for stem, rows in figure_tables(report).items():
        _write_csv(out / f"{stem}.csv", rows)
    print(f"{report.n_transactions} transactions over {report.n_steps} steps -> {out / 'metrics.json'}")
    return 0


def cmd_ingest(args) -> int:
    result = ingest(args.raw, args.bin_width, args.format)
    out = Path(args.out)
    _prepare_out(out, args.overwrite, ("transactions.csv", "ingest_meta.json"))
    write_transactions(out / "transactions.csv", result.transactions)
    meta = result.meta(str(args.raw))
    (out / "ingest_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for line, reason in result.dropped:
        print(f"{args.raw}:{line}: dropped: {reason}", file=sys.stderr)
    print(f"{len(result.transactions)} records in {result.n_steps} bins, {len(result.dropped)} dropped -> {out}")
    return 0


def _load_report(path: str) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "metrics.json"
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LogFormatError(f"{p}:{exc.lineno}: {exc.msg}") from None


def cmd_compare(args) -> int:
    rows = compare(_load_report(args.a), _load_report(args.b))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "a": str(args.a),
        "b": str(args.b),
        "note": "ingested logs use datatoken_address as the seller id",
        "rows": rows,
    }
    (out / "comparison.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    cols = ["metric", "a", "b", "delta", "rel_delta"]
    _write_csv(out / "comparison.csv", [cols] + [["" if r[c] is None else r[c] for c in cols] for r in rows])
    for r in rows:
        print(f"{r['metric']:36s} {r['a']!s:>14} {r['b']!s:>14} {r['delta']!s:>14}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="datamarket", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the market simulation")
    s.add_argument("--config", default="default", help="YAML config path or 'default'")
    s.add_argument("--seed", type=int)
    s.add_argument("--steps", type=int, help="override max_steps")
    s.add_argument("--policy", choices=("mock", "llm", "replay"), default="mock")
    s.add_argument("--transcript", help="transcript to write (llm) or read (replay)")
    s.add_argument("--resume", help="checkpoint written by an aborted run")
    s.add_argument("--out", required=True)
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="compute metrics from a run or normalized log")
    a.add_argument("log", help="run directory or transactions.csv")
    a.add_argument("--out", required=True)
    a.add_argument("--unweighted", action="store_true", help="plain per-step shares in the trend matrix")
    a.set_defaults(func=cmd_analyze)

    i = sub.add_parser("ingest", help="normalize raw order records")
    i.add_argument("raw")
    i.add_argument("--bin-width", default="1d")
    i.add_argument("--format", choices=("csv", "jsonl"))
    i.add_argument("--out", required=True)
    i.add_argument("--overwrite", action="store_true")
    i.set_defaults(func=cmd_ingest)

    c = sub.add_parser("compare", help="tabulate two metrics reports side by side")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except MissingCredential as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SimulationAborted as exc:
        print(f"error: {exc}; checkpoint: {exc.checkpoint}", file=sys.stderr)
        return 4
    except (ProviderUnavailable, InitializationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except SchemaMismatchError as exc:
        print(f"error: schema mismatch: {exc}", file=sys.stderr)
        return 5
    except (ConfigError, CLIError, IngestError, LogFormatError, EmptyLogError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
