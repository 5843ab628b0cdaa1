"""Tune each classical baseline on the validation split, then score it on the test splits.

Prints one table per asset in the Total Return / Daily Return / Sharpe layout
and writes them, plus the tuned parameters, under --out.

    python scripts/run_baselines.py [--data-dir data] [--out runs/baselines] [--fee 0.002]
"""

import argparse
import json
from pathlib import Path

from coinbench.dataio import get_split, load_dataset
from coinbench.engine import FeeModel
from coinbench.metrics import render_matrix, summarize
from coinbench.strategies import StrategySpec, evaluate, save_tuned, tune

KINDS = ("buy_and_hold", "sma", "slma", "macd", "bollinger", "forecaster")
TUNED = ("sma", "slma", "forecaster")
CONDITIONS = ("bullish", "sideways", "bearish")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", default="data")
    parser.add_argument("--out", default="runs/baselines")
    parser.add_argument("--fee", type=float, default=0.002)
    parser.add_argument("--assets", nargs="+", default=["BTC", "ETH", "SOL"])
    args = parser.parse_args()

    data, out, fee = Path(args.data_dir), Path(args.out), FeeModel(args.fee)
    out.mkdir(parents=True, exist_ok=True)
    for asset in args.assets:
        ds = load_dataset(data / f"{asset}_market.csv", data / f"{asset}_txn.csv", data / f"{asset}_news.jsonl")
        table = {}
        for kind in KINDS:
            spec = StrategySpec(kind)
            if kind in TUNED:
                spec = tune(ds, get_split(asset, "validation"), kind, fee=fee).chosen
                save_tuned(out / "tuned.json", asset, spec)
            table[spec.label] = {c: summarize(evaluate(ds, get_split(asset, c), spec, fee)) for c in CONDITIONS}
        text = render_matrix(table, CONDITIONS)
        (out / f"{asset}.md").write_text(text, encoding="utf-8")
        print(f"## {asset}\n\n{text}")
    print(json.dumps(json.loads((out / "tuned.json").read_text()), indent=2))


if __name__ == "__main__":
    main()
