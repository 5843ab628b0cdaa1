import os
from datetime import date, timedelta
from pathlib import Path

import pytest

from coinbench.dataio import Dataset, MarketDay, SplitSpec

ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = ROOT / "data"
GOLDEN_DIR = Path(__file__).parent / "golden"


def make_market(opens, start=date(2023, 1, 1), closes=None):
    """MarketDay list with the given opens; closes default to the next open."""
    opens = [float(p) for p in opens]
    if closes is None:
        closes = opens[1:] + [opens[-1]]
    days = []
    for k, (o, c) in enumerate(zip(opens, closes)):
        days.append(MarketDay(start + timedelta(days=k), o, max(o, c) * 1.01, min(o, c) * 0.99, c, 1e6, 1e9))
    return days


def make_dataset(opens, start=date(2023, 1, 1), **kwargs):
    return Dataset(market=make_market(opens, start), **kwargs)


def full_split(dataset, asset="TEST", name="custom", skip=0):
    """Split over the whole series (optionally skipping warm-up days), valued on the last day."""
    return SplitSpec(asset, name, dataset.market[skip].date, dataset.market[-1].date)


def result_from_values(values, start=date(2023, 1, 1)):
    """RunResult whose valuation sequence is exactly ``values`` (all holdings, price = net worth)."""
    from coinbench.engine import RunRecord, RunResult

    *daily, final = [float(v) for v in values]
    records = [
        RunRecord(start + timedelta(days=k), w, 0.0, 0.0, 0.0, 1.0, w, w) for k, w in enumerate(daily)
    ]
    return RunResult(records, daily[0], final, start + timedelta(days=len(daily)), final)


def check_golden(name: str, text: str) -> None:
    """Compare ``text`` with a committed golden file; ``GOLDEN_UPDATE=1`` rewrites it."""
    path = GOLDEN_DIR / name
    if os.environ.get("GOLDEN_UPDATE") == "1":
        path.parent.mkdir(exist_ok=True)
        path.write_text(text, encoding="utf-8")
    assert path.exists(), f"missing golden file {path}; run with GOLDEN_UPDATE=1"
    assert text == path.read_text(encoding="utf-8")


@pytest.fixture
def eth_data():
    from coinbench.dataio import load_dataset

    return load_dataset(DATA_DIR / "ETH_market.csv", DATA_DIR / "ETH_txn.csv", DATA_DIR / "ETH_news.jsonl")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid or getattr(rep, "when", "call") not in ("call", "setup"):
                continue
            if rep.when == "setup" and outcome == "passed":
                continue
            name = nodeid.split("::")[-1]
            lines.append((name, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {name}")
