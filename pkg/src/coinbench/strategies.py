"""Classical baseline strategies, a forecaster-driven strategy, and a grid tuner.

Every strategy is a pure function of a :class:`DecisionContext` plus fixed
parameters and emits full-position signals (+1 buy with all cash, -1 sell all
holdings, 0 hold). Indicators run over the open-price history with today's
open appended, so nothing later than the decision point is visible.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date
from functools import partial
from itertools import combinations
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from . import indicators
from .dataio import DataError, Dataset, SplitSpec, _parse_date
from .engine import (
    BUY_ALL,
    DEFAULT_CAPITAL,
    HOLD,
    SELL_ALL,
    DecisionContext,
    FeeModel,
    RunResult,
    TradeAction,
    run_backtest,
)
from .metrics import MetricsSummary, summarize

WINDOW_GRID = (5, 10, 15, 20, 30)
KINDS = ("buy_and_hold", "sma", "slma", "macd", "bollinger", "forecaster")

# parameter order per kind; the first entry drives the tuner's final tie-break
PARAM_ORDER = {
    "buy_and_hold": (),
    "sma": ("window",),
    "slma": ("short", "long"),
    "macd": ("fast", "slow", "signal"),
    "bollinger": ("window", "multiplier"),
    "forecaster": ("predictor",),
}
DEFAULT_PARAMS = {
    "buy_and_hold": {},
    "sma": {"window": 20},
    "slma": {"short": 5, "long": 20},
    "macd": {"fast": 12, "slow": 26, "signal": 9},
    "bollinger": {"window": 20, "multiplier": 2.0},
    "forecaster": {"predictor": "momentum"},
}


def _signal(direction: int) -> TradeAction:
    return BUY_ALL if direction > 0 else SELL_ALL if direction < 0 else HOLD


def buy_and_hold(ctx: DecisionContext) -> TradeAction:
    return BUY_ALL if ctx.day_index == 0 else HOLD


def sma_strategy(ctx: DecisionContext, window: int) -> TradeAction:
    """Buy while the open sits above its trailing average, sell while below."""
    prices = ctx.prices()
    avg = indicators.sma(prices[-window:], window)[-1]
    if avg is None or prices[-1] == avg:
        return HOLD
    return BUY_ALL if prices[-1] > avg else SELL_ALL


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def crossing_signal(spread: Sequence[float | None]) -> int:
    """Signal for the last point of ``spread`` (fast minus slow line).

    +1 when the spread turns positive and the most recent non-zero spread
    before it was negative; -1 for the mirror case; 0 otherwise. Undefined
    (``None``) points end the look-back, so warm-up never signals.
    """
    if len(spread) < 2 or spread[-1] is None or spread[-2] is None:
        return 0
    now = _sign(spread[-1])
    if now == 0:
        return 0
    for value in reversed(spread[:-1]):
        if value is None:
            return 0
        before = _sign(value)
        if before != 0:
            return now if before != now else 0
    return 0


def slma_strategy(ctx: DecisionContext, short: int, long: int) -> TradeAction:
    if short >= long:
        raise ValueError(f"short window must be below long window, got {short} >= {long}")
    prices = ctx.prices()
    fast = indicators.sma(prices, short)
    slow = indicators.sma(prices, long)
    spread = [None if f is None or s is None else f - s for f, s in zip(fast, slow)]
    return _signal(crossing_signal(spread))


def macd_strategy(ctx: DecisionContext, fast: int = 12, slow: int = 26, signal: int = 9) -> TradeAction:
    prices = ctx.prices()
    points = indicators.macd(prices, fast, slow, signal)
    # points before `slow - 1` still carry the seed transient
    spread = [None if i < slow - 1 else p.histogram for i, p in enumerate(points)]
    return _signal(crossing_signal(spread))


def bollinger_strategy(ctx: DecisionContext, window: int = 20, multiplier: float = 2.0) -> TradeAction:
    """Mean reversion: buy below the lower band, sell above the upper band."""
    prices = ctx.prices()
    band = indicators.bollinger(prices[-window:], window, multiplier)[-1]
    if band is None:
        return HOLD
    price = prices[-1]
    if price < band.lower:
        return BUY_ALL
    if price > band.upper:
        return SELL_ALL
    return HOLD


Predictor = Callable[[Sequence[float], date], float]


def persistence_predictor(prices: Sequence[float], today: date) -> float:
    return prices[-1]


def momentum_predictor(prices: Sequence[float], today: date) -> float:
    """Extrapolate the last one-day move; falls back to persistence on a single point.

    A forecast at or below zero is clamped to half of today's price so the
    strategy still reads it as a predicted drop.
    """
    if len(prices) < 2:
        return prices[-1]
    guess = 2 * prices[-1] - prices[-2]
    return guess if guess > 0 else prices[-1] / 2


class FilePredictor:
    """Predictions read from a ``date,predicted_next_open`` CSV."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        self.table: dict[date, float] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or {"date", "predicted_next_open"} - set(reader.fieldnames):
                raise DataError(f"{path}: header must be date,predicted_next_open")
            for lineno, row in enumerate(reader, start=2):
                where = f"{path}:{lineno}"
                try:
                    value = float(row["predicted_next_open"])
                except (TypeError, ValueError):
                    raise DataError(f"{where}: bad prediction {row['predicted_next_open']!r}") from None
                self.table[_parse_date(row["date"], where)] = value

    def __call__(self, prices: Sequence[float], today: date) -> float:
        try:
            return self.table[today]
        except KeyError:
            raise DataError(f"{self.path}: no prediction for {today}") from None


PREDICTORS: dict[str, Predictor] = {"momentum": momentum_predictor, "persistence": persistence_predictor}


def forecaster_strategy(ctx: DecisionContext, predictor: Predictor) -> TradeAction:
    predicted = predictor(ctx.prices(), ctx.today)
    if not (isinstance(predicted, (int, float)) and math.isfinite(predicted) and predicted > 0):
        raise ValueError(f"{ctx.today}: predictor returned an invalid price {predicted!r}")
    return _signal(_sign(predicted - ctx.today_open))


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        merged = {**DEFAULT_PARAMS[self.kind], **self.params}
        unknown = set(merged) - set(PARAM_ORDER[self.kind])
        if unknown:
            raise ValueError(f"{self.kind}: unknown parameter(s) {', '.join(sorted(unknown))}")
        object.__setattr__(self, "params", {k: merged[k] for k in PARAM_ORDER[self.kind]})
        self._validate()

    def _validate(self):
        p = self.params
        ints = {"sma": ("window",), "slma": ("short", "long"), "macd": ("fast", "slow", "signal"), "bollinger": ("window",)}
        for name in ints.get(self.kind, ()):
            if isinstance(p[name], bool) or not isinstance(p[name], int) or p[name] < 1:
                raise ValueError(f"{self.kind}: {name} must be a positive integer, got {p[name]!r}")
        if self.kind == "slma" and p["short"] >= p["long"]:
            raise ValueError(f"slma: short ({p['short']}) must be below long ({p['long']})")
        if self.kind == "macd" and p["fast"] >= p["slow"]:
            raise ValueError(f"macd: fast ({p['fast']}) must be below slow ({p['slow']})")
        if self.kind == "bollinger":
            if p["window"] < 2:
                raise ValueError("bollinger: window must be >= 2")
            if not (isinstance(p["multiplier"], (int, float)) and p["multiplier"] > 0):
                raise ValueError("bollinger: multiplier must be > 0")

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind
        return f"{self.kind}(" + ",".join(f"{k}={v}" for k, v in self.params.items()) + ")"

    def sort_key(self) -> tuple:
        return tuple(str(v) if isinstance(v, str) else v for v in self.params.values())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "StrategySpec":
        return cls(obj["kind"], dict(obj.get("params", {})))

    def build(self) -> Callable[[DecisionContext], TradeAction]:
        p = self.params
        if self.kind == "buy_and_hold":
            return buy_and_hold
        if self.kind == "sma":
            return partial(sma_strategy, window=p["window"])
        if self.kind == "slma":
            return partial(slma_strategy, short=p["short"], long=p["long"])
        if self.kind == "macd":
            return partial(macd_strategy, fast=p["fast"], slow=p["slow"], signal=p["signal"])
        if self.kind == "bollinger":
            return partial(bollinger_strategy, window=p["window"], multiplier=p["multiplier"])
        name = p["predictor"]
        predictor = PREDICTORS[name] if name in PREDICTORS else FilePredictor(name)
        return partial(forecaster_strategy, predictor=predictor)


def default_grid(kind: str) -> list[StrategySpec]:
    if kind == "sma":
        return [StrategySpec("sma", {"window": w}) for w in WINDOW_GRID]
    if kind == "slma":
        return [StrategySpec("slma", {"short": s, "long": l}) for s, l in combinations(WINDOW_GRID, 2)]
    if kind == "forecaster":
        return [StrategySpec("forecaster", {"predictor": name}) for name in PREDICTORS]
    return [StrategySpec(kind)]


SELECTION_METRICS = ("total_return", "sharpe", "daily_return_mean")


@dataclass
class TuneReport:
    grid: list[StrategySpec]
    scores: list[MetricsSummary]
    chosen: StrategySpec
    selection_metric: str

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return {
            "selection_metric": self.selection_metric,
            "chosen": self.chosen.to_dict(),
            "grid": [
                {"spec": spec.to_dict(), "scores": asdict(score)} for spec, score in zip(self.grid, self.scores)
            ],
        }


class TuneError(RuntimeError):
    pass


def selection_key(spec: StrategySpec, score: MetricsSummary, metric: str) -> tuple:
    """Sort key whose minimum is the preferred spec."""
    return (-getattr(score, metric), -score.sharpe, spec.sort_key())


def evaluate(
    dataset: Dataset,
    split: SplitSpec,
    spec: StrategySpec,
    fee: FeeModel | None = None,
    capital: float = DEFAULT_CAPITAL,
    info_lag: int = 1,
) -> RunResult:
    return run_backtest(
        dataset, split, spec.build(), fee=fee, capital=capital, info_lag=info_lag,
        metadata={"strategy": spec.to_dict()},
    )


def tune(
    dataset: Dataset,
    validation_split: SplitSpec,
    kind: str,
    grid: Sequence[StrategySpec] | None = None,
    fee: FeeModel | None = None,
    capital: float = DEFAULT_CAPITAL,
    metric: str = "total_return",
) -> TuneReport:
    """Backtest every spec on the validation split and keep the best.

    Ties on ``metric`` go to the higher Sharpe, then the smaller parameters.
    """
    if metric not in SELECTION_METRICS:
        raise ValueError(f"unknown selection metric {metric!r}")
    grid = list(grid) if grid is not None else default_grid(kind)
    if not grid:
        raise ValueError("tuning grid is empty")
    for spec in grid:
        if spec.kind != kind:
            raise ValueError(f"grid entry {spec.label} is not of kind {kind!r}")
    scores = []
    for spec in grid:
        try:
            scores.append(summarize(evaluate(dataset, validation_split, spec, fee, capital)))
        except Exception as exc:
            raise TuneError(f"{spec.label}: {exc}") from exc
    best = min(range(len(grid)), key=lambda i: selection_key(grid[i], scores[i], metric))
    return TuneReport(grid=grid, scores=scores, chosen=grid[best], selection_metric=metric)


def save_tuned(path: str | Path, asset: str, spec: StrategySpec) -> None:
    """Record ``spec`` as the tuned choice for ``asset`` in a JSON cache file."""
    path = Path(path)
    cache = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
    cache.setdefault(asset, {})[spec.kind] = dict(spec.params)
    path.write_text(json.dumps(cache, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_tuned(path: str | Path, asset: str, kind: str) -> StrategySpec | None:
    path = Path(path)
    if not path.exists():
        return None
    params = json.loads(path.read_text(encoding="utf-8")).get(asset, {}).get(kind)
    return None if params is None else StrategySpec(kind, params)
