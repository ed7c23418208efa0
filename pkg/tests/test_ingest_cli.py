import csv
import json

import pytest

from datamarket import SimConfig, Simulation
from datamarket.cli import main
from datamarket.ingest import IngestError, ingest, parse_bin_width, parse_timestamp
from datamarket.logio import LogFormatError, load_log, read_events, read_transactions
from datamarket.policies import TranscriptLog, llm_policies

RAW = ["order_id", "transaction_hash", "datatoken_address", "payer_address", "amount", "price", "timestamp"]
T0 = 1_700_000_000


def write_raw(path, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW)
        w.writerows(rows)
    return path


def rec(i, ts, token="0xd1", payer="0xb1", price=5):
    return [f"o{i}", f"0x{i:x}", token, payer, 1, price, ts]


class TestIngest:
    def test_one_day(self, tmp_path):
        p = write_raw(tmp_path / "r.csv", [rec(i, T0 + i * 3600) for i in range(3)])
        res = ingest(p, "1d")
        assert [t.step for t in res.transactions] == [0, 0, 0]

    def test_next_day(self, tmp_path):
        p = write_raw(tmp_path / "r.csv", [rec(0, T0 + 25 * 3600), rec(1, T0)])
        res = ingest(p, "1d")
        assert [(t.step, t.price) for t in res.transactions] == [(0, 5.0), (1, 5.0)]
        assert res.records[0].order_id == "o1"

    def test_duplicates_and_bad_rows(self, tmp_path, caplog):
        rows = [rec(0, T0), rec(0, T0 + 5), rec(1, "not-a-time"), rec(2, T0, price=-3), rec(3, T0)]
        rows[3][2] = ""
        res = ingest(write_raw(tmp_path / "r.csv", rows), "1d")
        assert len(res.transactions) == 2
        assert [line for line, _ in res.dropped] == [3, 4, 5]
        assert "duplicate order_id o0" in res.dropped[0][1]
        assert "dropped" in caplog.text

    def test_jsonl_and_iso(self, tmp_path):
        p = tmp_path / "r.jsonl"
        p.write_text(
            json.dumps(dict(zip(RAW, rec(0, "2024-01-01T00:00:00Z")))) + "\n\n{oops\n"
            + json.dumps(dict(zip(RAW, rec(1, "2024-01-02T06:00:00+00:00")))) + "\n"
        )
        res = ingest(p, "1d")
        assert [t.step for t in res.transactions] == [0, 1]
        assert res.dropped[0][0] == 3

    def test_nothing_valid(self, tmp_path):
        with pytest.raises(IngestError):
            ingest(write_raw(tmp_path / "r.csv", [rec(0, "x")]))

    def test_header(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("order_id,price\n1,2\n")
        with pytest.raises(IngestError, match="header"):
            ingest(p)

    @pytest.mark.parametrize("text, seconds", [("1d", 86400), ("12h", 43200), ("30m", 1800), ("3600", 3600), (60, 60)])
    def test_bin_width(self, text, seconds):
        assert parse_bin_width(text) == seconds

    @pytest.mark.parametrize("bad", ["0d", "soon", "-1h"])
    def test_bad_bin_width(self, bad):
        with pytest.raises(IngestError):
            parse_bin_width(bad)

    def test_timestamp_forms(self):
        assert parse_timestamp("1970-01-01T00:01:00") == 60.0
        assert parse_timestamp("60") == parse_timestamp(60) == 60.0


class TestLogIO:
    def test_bad_line_named(self, tmp_path):
        p = tmp_path / "transactions.csv"
        p.write_text("step,buyer_id,seller_id,dataset_id,version,price\n0,b,s,d,1,2.5\n1,b,s,d,x,2\n")
        with pytest.raises(LogFormatError, match=r"transactions.csv:3"):
            read_transactions(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "transactions.csv"
        p.write_text("a,b\n")
        with pytest.raises(LogFormatError, match=":1:"):
            read_transactions(p)

    def test_bad_event_line(self, tmp_path):
        p = tmp_path / "events.jsonl"
        p.write_text('{"type": "entry"}\n[1]\n')
        with pytest.raises(LogFormatError, match="events.jsonl:2"):
            read_events(p)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["simulate", "--seed", "3", "--steps", "12", "--out", str(out)]) == 0
    return out


class TestCLI:
    def test_simulate_outputs(self, run_dir):
        meta = json.loads((run_dir / "run_meta.json").read_text())
        assert meta["status"] == "completed" and meta["seed"] == 3
        assert meta["steps_completed"] == 12
        log = load_log(run_dir)
        assert log.n_steps == 12 and log.transactions and log.events

    def test_refuses_to_overwrite(self, run_dir, capsys):
        assert main(["simulate", "--seed", "3", "--steps", "2", "--out", str(run_dir)]) == 2
        assert "--overwrite" in capsys.readouterr().err

    def test_analyze_twice_identical(self, run_dir, tmp_path):
        blobs = []
        for name in ("a", "b"):
            assert main(["analyze", str(run_dir), "--out", str(tmp_path / name)]) == 0
            blobs.append((tmp_path / name / "metrics.json").read_bytes())
        assert blobs[0] == blobs[1]
        report = json.loads(blobs[0])
        for block in ("purchases_per_dataset", "purchases_per_buyer", "degree", "autocorrelation", "trend_matrix"):
            assert block in report
        assert (tmp_path / "a" / "trend_matrix.csv").exists()

    def test_compare(self, run_dir, tmp_path):
        main(["analyze", str(run_dir), "--out", str(tmp_path / "m")])
        assert main(["compare", str(tmp_path / "m"), str(tmp_path / "m"), "--out", str(tmp_path / "c")]) == 0
        rows = json.loads((tmp_path / "c" / "comparison.json").read_text())["rows"]
        assert all(r["delta"] in (0, None) for r in rows)

    def test_compare_schema_mismatch(self, run_dir, tmp_path):
        main(["analyze", str(run_dir), "--out", str(tmp_path / "m")])
        doc = json.loads((tmp_path / "m" / "metrics.json").read_text())
        del doc["autocorrelation"]
        (tmp_path / "broken.json").write_text(json.dumps(doc))
        code = main(["compare", str(tmp_path / "m"), str(tmp_path / "broken.json"), "--out", str(tmp_path / "c")])
        assert code == 5

    def test_analyze_malformed(self, tmp_path, capsys):
        p = tmp_path / "transactions.csv"
        p.write_text("step,buyer_id,seller_id,dataset_id,version,price\n0,b,s,d,1,oops\n")
        assert main(["analyze", str(p), "--out", str(tmp_path / "m")]) == 2
        assert "transactions.csv:2" in capsys.readouterr().err

    def test_analyze_empty(self, tmp_path):
        p = tmp_path / "transactions.csv"
        p.write_text("step,buyer_id,seller_id,dataset_id,version,price\n")
        assert main(["analyze", str(p), "--out", str(tmp_path / "m")]) == 2

    def test_llm_without_credential(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv("DATAMARKET_LLM_API_KEY", raising=False)
        assert main(["simulate", "--policy", "llm", "--out", str(tmp_path)]) == 3
        assert "credential missing" in capsys.readouterr().err

    def test_replay_needs_transcript(self, tmp_path):
        assert main(["simulate", "--policy", "replay", "--out", str(tmp_path)]) == 2

    def test_ingest_command(self, tmp_path, capsys):
        p = write_raw(tmp_path / "r.csv", [rec(0, T0), rec(0, T0 + 1), rec(1, T0 + 90_000)])
        assert main(["ingest", str(p), "--out", str(tmp_path / "n")]) == 0
        meta = json.loads((tmp_path / "n" / "ingest_meta.json").read_text())
        assert (meta["n_valid"], meta["n_dropped"], meta["n_steps"]) == (2, 1, 2)
        assert "r.csv:3: dropped" in capsys.readouterr().err


class Canned:
    """Deterministic stand-in for a completion service."""

    name = "canned"

    def send(self, system, user, schema_id):
        if schema_id == "metadata":
            n = user.count("\n- ") + user.startswith("- ")
            field = "sports"
            for f in SimConfig().fields:
                if f in system:
                    field = f
                    break
            return json.dumps({
                "data_name": f"set_{n}", "description": "d", "columns": ["a"], "tags": [field],
                "data_price": 10 + n, "update_frequency": "low",
            })
        if schema_id == "goal":
            return '{"analysis_purpose": "study things"}'
        if schema_id == "seller_action":
            return '{"action": "do_nothing"}'
        hits = json.loads(user.rsplit("\n", 1)[-1])
        if hits:
            return json.dumps({"action": "buy", "dataset_id": hits[0]["dataset_id"]})
        return '{"action": "search", "query": "things"}'


def test_replay_reproduces_run(tmp_path):
    cfg = SimConfig(initial_buyers=3, initial_sellers=2, max_steps=4, rng_seed=1)
    cfg_path = tmp_path / "cfg.yaml"
    cfg_path.write_text(cfg.to_yaml())
    transcript = TranscriptLog(tmp_path / "t.jsonl")
    live = tmp_path / "live"
    Simulation(cfg, llm_policies(cfg, Canned(), transcript), out_dir=live).run()
    assert transcript.entries

    replayed = tmp_path / "replayed"
    code = main(["simulate", "--config", str(cfg_path), "--policy", "replay",
                 "--transcript", str(tmp_path / "t.jsonl"), "--out", str(replayed)])
    assert code == 0
    assert (live / "events.jsonl").read_bytes() == (replayed / "events.jsonl").read_bytes()
    assert any(e["type"] == "transaction" for e in read_events(live / "events.jsonl"))
