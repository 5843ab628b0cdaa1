"""Write the bundled synthetic data files for BTC, ETH and SOL into data/.

Open prices on every split start/end date are pinned to the published split
endpoints; all other values are simulated from a fixed seed.

    python scripts/make_synthetic_data.py [--out data] [--seed 0]
"""

import argparse
from pathlib import Path

from coinbench.dataio import dump_market_csv, dump_news_jsonl, dump_txn_stats_csv
from coinbench.synthetic import NATIVE_UNIT, SPLIT_ENDPOINTS, anchored_market, synthetic_news, synthetic_txn_stats


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, asset in enumerate(sorted(SPLIT_ENDPOINTS)):
        market = anchored_market(asset, seed=args.seed + 100 * k)
        (out / f"{asset}_market.csv").write_text(dump_market_csv(market), encoding="utf-8")
        txn = synthetic_txn_stats(market, seed=args.seed + 100 * k)
        (out / f"{asset}_txn.csv").write_text(dump_txn_stats_csv(txn, unit=NATIVE_UNIT[asset]), encoding="utf-8")
        (out / f"{asset}_news.jsonl").write_text(dump_news_jsonl(synthetic_news(market, asset)), encoding="utf-8")
        print(f"{asset}: {len(market)} days -> {out}")


if __name__ == "__main__":
    main()
