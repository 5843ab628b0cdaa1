"""Command-line entry point.

    coinbench backtest  --asset ETH --split bullish --strategy buy_and_hold --fee 0
    coinbench tune      --asset ETH --kind slma
    coinbench compare   --asset ETH --strategies buy_and_hold sma slma macd bollinger
    coinbench agent-run --asset ETH --split bullish --ablation full --mock-actions 1,0,-1

Artifacts go to ``--out`` under content-addressed names; each embeds the
resolved run configuration, and ``--config`` re-runs from such an artifact.
Exit codes: 0 success, 1 strategy/backend failure, 2 configuration/data failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .agents import ABLATIONS, AblationConfig, BackendConfig, BackendError, ChatBackend, MockBackend, agent_strategy
from .dataio import DataError, Dataset, get_split, load_dataset, load_splits
from .engine import DEFAULT_CAPITAL, DEFAULT_FEE_RATE, FeeModel, RunResult, StrategyError, run_backtest
from .metrics import render_matrix, summarize
from .strategies import KINDS, StrategySpec, TuneError, default_grid, load_tuned, save_tuned, tune

log = logging.getLogger("coinbench")

CONDITIONS = ("bullish", "sideways", "bearish")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    asset: str
    split: str
    strategy: dict | None = None
    ablation: str | None = None
    fee: float = DEFAULT_FEE_RATE
    capital: float = DEFAULT_CAPITAL
    info_lag: int = 1
    market: str = ""
    txn_stats: str | None = None
    news: str | None = None
    splits: str | None = None
    backend: str | None = None
    mock: str | None = None
    mock_actions: list[float] | None = None
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not 0 <= self.fee < 1:
            raise ConfigError(f"fee must be in [0, 1), got {self.fee}")
        if self.capital <= 0:
            raise ConfigError(f"capital must be > 0, got {self.capital}")
        for name in ("market", "txn_stats", "news", "splits", "backend", "mock"):
            path = getattr(self, name)
            if path and not Path(path).is_file():
                raise ConfigError(f"{name} file not found: {path}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in obj.items() if k in known})

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _data_paths(args) -> dict[str, str | None]:
    data_dir = Path(args.data_dir)

    def pick(explicit, suffix, required=False):
        if explicit:
            return str(Path(explicit).resolve())
        candidate = data_dir / f"{args.asset}_{suffix}"
        if required or candidate.is_file():
            return str(candidate.resolve())
        return None

    return {
        "market": pick(args.market, "market.csv", required=True),
        "txn_stats": pick(args.txn, "txn.csv"),
        "news": pick(args.news, "news.jsonl"),
        "splits": str(Path(args.splits).resolve()) if args.splits else None,
    }


def _parse_params(pairs: list[str] | None) -> dict[str, Any]:
    params = {}
    for pair in pairs or []:
        key, sep, raw = pair.partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {pair!r}")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def _load_config_file(path: str) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    if "metadata" in obj and "config" in obj["metadata"]:
        obj = obj["metadata"]["config"]
    return RunConfig.from_dict(obj)


def _dataset(cfg: RunConfig) -> Dataset:
    return load_dataset(cfg.market, cfg.txn_stats, cfg.news)


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _summary_line(result: RunResult, artifact: Path) -> str:
    s = summarize(result)
    return json.dumps({"artifact": str(artifact), **asdict(s)}, sort_keys=True)


def execute_backtest(cfg: RunConfig) -> RunResult:
    cfg.validate()
    split = get_split(cfg.asset, cfg.split, load_splits(cfg.splits))
    spec = StrategySpec.from_dict(cfg.strategy)
    return run_backtest(
        _dataset(cfg), split, spec.build(), FeeModel(cfg.fee), cfg.capital, cfg.info_lag,
        metadata={"strategy": spec.to_dict(), "seed": cfg.seed, "config": cfg.to_dict()},
    )


def cmd_backtest(args) -> int:
    if args.config:
        cfg = _load_config_file(args.config)
    else:
        if not args.asset or not args.strategy:
            raise ConfigError("--asset and --strategy are required (or --config)")
        cfg = RunConfig(
            command="backtest", asset=args.asset, split=args.split,
            strategy=StrategySpec(args.strategy, _parse_params(args.param)).to_dict(),
            fee=args.fee, capital=args.capital, info_lag=args.info_lag, seed=args.seed, **_data_paths(args),
        )
    result = execute_backtest(cfg)
    path = _write(Path(args.out), f"backtest-{cfg.digest()}.json", result.to_json())
    print(_summary_line(result, path))
    return 0


def cmd_tune(args) -> int:
    paths = _data_paths(args)
    cfg = RunConfig(
        command="tune", asset=args.asset, split=args.split, fee=args.fee, capital=args.capital,
        info_lag=args.info_lag, seed=args.seed, extra={"kind": args.kind, "metric": args.metric, "grid": args.grid},
        **paths,
    )
    cfg.validate()
    if args.kind not in KINDS:
        raise ConfigError(f"unknown strategy kind {args.kind!r}")
    grid = default_grid(args.kind)
    if args.grid:
        try:
            grid = [StrategySpec(args.kind, p) for p in json.loads(args.grid)]
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--grid is not valid JSON: {exc.msg}") from None
    split = get_split(cfg.asset, cfg.split, load_splits(cfg.splits))
    report = tune(_dataset(cfg), split, args.kind, grid, FeeModel(cfg.fee), cfg.capital, args.metric)
    body = {"config": cfg.to_dict(), **report.to_dict()}
    path = _write(Path(args.out), f"tune-{cfg.digest()}.json", json.dumps(body, sort_keys=True, indent=2) + "\n")
    cache = Path(args.cache) if args.cache else Path(args.out) / "tuned.json"
    save_tuned(cache, cfg.asset, report.chosen)
    print(json.dumps({"artifact": str(path), "chosen": report.chosen.to_dict(), "evaluated": len(grid)}, sort_keys=True))
    return 0


def run_or_load(cfg: RunConfig, out: Path) -> RunResult:
    """Reuse a matching backtest artifact from ``out`` when present."""
    path = out / f"backtest-{cfg.digest()}.json"
    if path.is_file():
        return RunResult.from_dict(json.loads(path.read_text(encoding="utf-8")))
    result = execute_backtest(cfg)
    _write(out, path.name, result.to_json())
    return result


def cmd_compare(args) -> int:
    paths = _data_paths(args)
    out = Path(args.out)
    table: dict[str, dict] = {}
    for kind in args.strategies:
        spec = (load_tuned(args.tuned, args.asset, kind) if args.tuned else None) or StrategySpec(kind)
        per_cond = {}
        for cond in args.conditions:
            cfg = RunConfig(
                command="backtest", asset=args.asset, split=cond, strategy=spec.to_dict(), fee=args.fee,
                capital=args.capital, info_lag=args.info_lag, seed=args.seed, **paths,
            )
            per_cond[cond] = summarize(run_or_load(cfg, out))
        table[spec.label] = per_cond
    text = render_matrix(table, args.conditions, args.format)
    sys.stdout.write(text)
    if args.save:
        _write(out, args.save, text)
    return 0


def _backend_for(cfg: RunConfig):
    if cfg.mock_actions is not None:
        return MockBackend.scripted(cfg.mock_actions)
    if cfg.mock:
        return MockBackend.from_jsonl(cfg.mock)
    if cfg.backend:
        config = BackendConfig.from_file(cfg.backend)
        if cfg.extra.get("seed_backend"):
            config = BackendConfig(**{**asdict(config), "seed": cfg.seed})
        return ChatBackend(config)
    raise ConfigError("agent-run needs --backend, --mock, or --mock-actions")


def cmd_agent_run(args) -> int:
    if args.config:
        cfg = _load_config_file(args.config)
    else:
        if not args.asset:
            raise ConfigError("--asset is required (or --config)")
        actions = None
        if args.mock_actions is not None:
            try:
                actions = [float(x) for x in args.mock_actions.split(",") if x.strip()]
            except ValueError:
                raise ConfigError(f"--mock-actions must be comma-separated numbers, got {args.mock_actions!r}") from None
        cfg = RunConfig(
            command="agent-run", asset=args.asset, split=args.split, ablation=args.ablation, fee=args.fee,
            capital=args.capital, info_lag=args.info_lag, seed=args.seed, backend=args.backend, mock=args.mock,
            mock_actions=actions, extra={"seed_backend": args.seed_backend}, **_data_paths(args),
        )
    cfg.validate()
    ablation = AblationConfig(cfg.ablation or "full")
    split = get_split(cfg.asset, cfg.split, load_splits(cfg.splits))
    dataset = _dataset(cfg)
    backend = _backend_for(cfg)
    agent = agent_strategy(ablation, backend, asset=cfg.asset)
    out = Path(args.out)
    stem = f"agent-{cfg.digest()}"
    try:
        result = run_backtest(
            dataset, split, agent, FeeModel(cfg.fee), cfg.capital, cfg.info_lag,
            metadata={"ablation": ablation.name, "model_id": backend.model_id, "seed": cfg.seed, "config": cfg.to_dict()},
        )
    except StrategyError as exc:
        if isinstance(exc.__cause__, BackendError):
            raise BackendError(f"{exc}: {exc.__cause__}") from exc.__cause__
        raise
    finally:
        _write(out, f"{stem}.audit.jsonl", agent.audit_jsonl())
    path = _write(out, f"{stem}.json", result.to_json())
    print(_summary_line(result, path))
    return 0


def _add_common(p: argparse.ArgumentParser, split_default: str | None) -> None:
    p.add_argument("--asset", help="asset identifier, e.g. BTC, ETH, SOL")
    if split_default is not None:
        p.add_argument("--split", default=split_default, help=f"split name (default: {split_default})")
    p.add_argument("--fee", type=float, default=DEFAULT_FEE_RATE, help="proportional fee rate (default: 0.002)")
    p.add_argument("--capital", type=float, default=DEFAULT_CAPITAL)
    p.add_argument("--info-lag", type=int, default=1, help="days of delay for on-chain stats and news")
    p.add_argument("--data-dir", default="data", help="directory holding <ASSET>_market.csv and friends")
    p.add_argument("--market", help="market CSV (overrides --data-dir)")
    p.add_argument("--txn", help="transaction-statistics CSV")
    p.add_argument("--news", help="news JSONL")
    p.add_argument("--splits", help="split table CSV (default: bundled table)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs", help="artifact directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coinbench", description="Daily crypto backtests and agent runs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("backtest", help="run one strategy over one split")
    _add_common(p, "bullish")
    p.add_argument("--strategy", choices=KINDS)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="strategy parameter (repeatable)")
    p.add_argument("--config", help="re-run from a RunConfig JSON or a run artifact")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("tune", help="grid-search a strategy on the validation split")
    _add_common(p, "validation")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--grid", help='JSON list of parameter maps, e.g. \'[{"window": 5}]\'')
    p.add_argument("--metric", default="total_return", choices=("total_return", "sharpe", "daily_return_mean"))
    p.add_argument("--cache", help="tuned-parameter cache file (default: <out>/tuned.json)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("compare", help="render a comparison table across market conditions")
    _add_common(p, None)
    p.add_argument("--strategies", nargs="*", default=[], choices=KINDS)
    p.add_argument("--conditions", nargs="+", default=list(CONDITIONS))
    p.add_argument("--tuned", help="tuned-parameter cache to take parameters from")
    p.add_argument("--format", default="md", choices=("md", "csv"))
    p.add_argument("--save", help="also write the table to this file name under --out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("agent-run", help="run the LLM agent pipeline under an ablation config")
    _add_common(p, "bullish")
    p.add_argument("--ablation", default="full", choices=list(ABLATIONS))
    p.add_argument("--backend", help="backend config JSON (endpoint, model, temperature, ...)")
    p.add_argument("--mock", help="mock fixture JSONL ({prompt_sha256, response} or {day_index, action})")
    p.add_argument("--mock-actions", help="comma-separated scripted actions for a mock backend")
    p.add_argument("--seed-backend", action="store_true", help="forward --seed to the backend request")
    p.add_argument("--config", help="re-run from a RunConfig JSON or a run artifact")
    p.set_defaults(func=cmd_agent_run)
    return parser


def _fail(code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc).splitlines()[0] if str(exc) else ""}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (StrategyError, BackendError, TuneError) as exc:
        return _fail(1, exc)
    except (ConfigError, DataError, FileNotFoundError, ValueError, KeyError) as exc:
        return _fail(2, exc)


if __name__ == "__main__":
    sys.exit(main())
