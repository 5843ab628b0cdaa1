"""Run every prompt ablation of the agent pipeline against a deterministic mock backend.

With a prompt-blind scripted mock all ablations trade identically, so the
table is a plumbing check; the per-config prompt sizes show what each
ablation removes. Point --backend at a chat-completions config to use a
hosted model instead.

    python scripts/run_ablation_mock.py [--asset ETH] [--split bullish] [--backend cfg.json]
"""

import argparse
import statistics
from pathlib import Path

import numpy as np

from coinbench.agents import ABLATIONS, BackendConfig, ChatBackend, MockBackend, agent_strategy
from coinbench.dataio import get_split, load_dataset
from coinbench.engine import run_backtest
from coinbench.metrics import render_table, summarize


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", default="data")
    parser.add_argument("--asset", default="ETH")
    parser.add_argument("--split", default="bullish")
    parser.add_argument("--backend", help="backend config JSON; default is a seeded scripted mock")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/ablation")
    args = parser.parse_args()

    data, out = Path(args.data_dir), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    asset = args.asset
    ds = load_dataset(data / f"{asset}_market.csv", data / f"{asset}_txn.csv", data / f"{asset}_news.jsonl")
    split = get_split(asset, args.split)
    script = np.round(np.random.default_rng(args.seed).uniform(-1, 1, 400), 2).tolist()

    rows = []
    for name in ABLATIONS:
        backend = ChatBackend(BackendConfig.from_file(args.backend)) if args.backend else MockBackend.scripted(script)
        agent = agent_strategy(name, backend, asset=asset)
        result = run_backtest(ds, split, agent, metadata={"ablation": name})
        (out / f"{asset}-{args.split}-{name}.json").write_text(result.to_json(), encoding="utf-8")
        agent.write_audit(out / f"{asset}-{args.split}-{name}.audit.jsonl")
        rows.append((name, summarize(result)))
        print(f"{name:>14}: {len(agent.audit):4d} model calls, mean prompt {statistics.fmean(map(len, agent.prompts)):7.0f} chars")
    print()
    print(render_table(rows))


if __name__ == "__main__":
    main()
