"""Daily backtest loop: fractional actions at the open, proportional fees."""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from typing import Any, Callable, Mapping, Sequence

from .dataio import Dataset, MarketDay, NewsItem, SplitSpec, TxnStatsDay, slice_split

SCHEMA_VERSION = 1
DEFAULT_CAPITAL = 1_000_000.0
DEFAULT_FEE_RATE = 0.002


class StrategyError(RuntimeError):
    """A strategy raised or returned an invalid action during a run."""


@dataclass(frozen=True)
class PortfolioState:
    cash: float
    holdings: float

    def __post_init__(self):
        for name in ("cash", "holdings"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")

    def net_worth(self, price: float) -> float:
        return self.cash + self.holdings * price


@dataclass(frozen=True)
class TradeAction:
    """Positive fractions spend that share of cash, negative ones sell that share of holdings."""

    fraction: float

    def __post_init__(self):
        f = self.fraction
        if isinstance(f, bool) or not isinstance(f, (int, float)) or math.isnan(f) or not -1.0 <= f <= 1.0:
            raise ValueError(f"action fraction must be a number in [-1, 1], got {f!r}")
        object.__setattr__(self, "fraction", float(f))


HOLD = TradeAction(0.0)
BUY_ALL = TradeAction(1.0)
SELL_ALL = TradeAction(-1.0)


@dataclass(frozen=True)
class FeeModel:
    rate: float = DEFAULT_FEE_RATE

    def __post_init__(self):
        if not (math.isfinite(self.rate) and 0.0 <= self.rate < 1.0):
            raise ValueError(f"fee rate must be in [0, 1), got {self.rate!r}")


@dataclass(frozen=True)
class RunRecord:
    date: date
    execution_price: float
    action: float
    fee_paid: float
    post_cash: float
    post_holdings: float
    net_worth: float  # post-trade, valued at execution_price
    pre_trade_net_worth: float  # previous state valued at today's open; capital on day one


@dataclass
class RunResult:
    records: list[RunRecord]
    start_net_worth: float
    final_net_worth: float
    valuation_date: date
    valuation_price: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def valuation_sequence(self) -> list[float]:
        """Net worth at each trading day's open (before trading), then at the end date."""
        if not self.records:
            return [self.start_net_worth, self.final_net_worth]
        return [r.pre_trade_net_worth for r in self.records] + [self.final_net_worth]

    def to_dict(self) -> dict:
        from .metrics import summarize

        summary = asdict(summarize(self)) if self.records else None
        return {
            "schema_version": SCHEMA_VERSION,
            "metadata": self.metadata,
            "start_net_worth": self.start_net_worth,
            "final_net_worth": self.final_net_worth,
            "valuation_date": self.valuation_date.isoformat(),
            "valuation_price": self.valuation_price,
            "records": [{**asdict(r), "date": r.date.isoformat()} for r in self.records],
            "summary": summary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "RunResult":
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported RunResult schema version {obj.get('schema_version')!r}")
        records = [RunRecord(**{**r, "date": date.fromisoformat(r["date"])}) for r in obj["records"]]
        return cls(
            records=records,
            start_net_worth=obj["start_net_worth"],
            final_net_worth=obj["final_net_worth"],
            valuation_date=date.fromisoformat(obj["valuation_date"]),
            valuation_price=obj["valuation_price"],
            metadata=dict(obj.get("metadata", {})),
        )


@dataclass(frozen=True)
class PastDecision:
    date: date
    action: float
    daily_return: float  # realised from that day's open to the next open


@dataclass(frozen=True)
class DecisionContext:
    """Everything a strategy may see when deciding at ``today``'s open.

    ``market_history`` holds only days strictly before ``today``; of today
    only the open is exposed. On-chain stats and news are lagged by the
    run's information lag.
    """

    today: date
    day_index: int
    today_open: float
    market_history: tuple[MarketDay, ...]
    txn_stats_history: tuple[TxnStatsDay, ...]
    news_history: Mapping[date, tuple[NewsItem, ...]]
    portfolio: PortfolioState
    past_decisions: tuple[PastDecision, ...]

    def prices(self, field: str = "open") -> list[float]:
        """Historical ``field`` values followed by today's open."""
        return [getattr(d, field) for d in self.market_history] + [self.today_open]


Strategy = Callable[[DecisionContext], "TradeAction | float"]


def init_portfolio(capital: float, first_open: float) -> PortfolioState:
    if not (math.isfinite(capital) and capital > 0):
        raise ValueError(f"capital must be > 0, got {capital!r}")
    if not (math.isfinite(first_open) and first_open > 0):
        raise ValueError(f"first_open must be > 0, got {first_open!r}")
    half = capital / 2
    return PortfolioState(cash=half, holdings=half / first_open)


def execute_action(
    state: PortfolioState, price: float, action: TradeAction, fee: FeeModel
) -> tuple[PortfolioState, float]:
    if not (math.isfinite(price) and price > 0):
        raise ValueError(f"price must be > 0, got {price!r}")
    a = action.fraction
    if a > 0:
        spend = a * state.cash
        return PortfolioState(state.cash - spend, state.holdings + spend * (1 - fee.rate) / price), spend * fee.rate
    if a < 0:
        sold = -a * state.holdings
        proceeds = sold * price
        return PortfolioState(state.cash + proceeds * (1 - fee.rate), state.holdings - sold), proceeds * fee.rate
    return state, 0.0


def _as_action(value, day: date) -> TradeAction:
    if isinstance(value, TradeAction):
        return value
    try:
        return TradeAction(value)
    except ValueError as exc:
        raise StrategyError(f"{day}: strategy returned an invalid action: {exc}") from None


def run_backtest(
    dataset: Dataset,
    split: SplitSpec,
    strategy: Strategy,
    fee: FeeModel | None = None,
    capital: float = DEFAULT_CAPITAL,
    info_lag: int = 1,
    metadata: Mapping[str, Any] | None = None,
) -> RunResult:
    """Run ``strategy`` over ``split``, trading once per day at the open.

    ``info_lag`` is the availability delay, in days, applied to on-chain
    statistics and news; 0 exposes same-day items.
    """
    fee = fee or FeeModel()
    if info_lag < 0:
        raise ValueError("info_lag must be >= 0")
    days, valuation = slice_split(dataset, split)
    start_idx = dataset.index_of(split.start)
    txn_dates = [t.date for t in dataset.txn_stats]
    news_dates = list(dataset.news)

    state = init_portfolio(capital, days[0].open)
    records: list[RunRecord] = []
    past: list[PastDecision] = []
    for k, day in enumerate(days):
        pre = state.net_worth(day.open)
        if records:
            last = records[-1]
            past.append(PastDecision(last.date, last.action, pre / last.pre_trade_net_worth - 1))
        cutoff = day.date - timedelta(days=info_lag)
        ctx = DecisionContext(
            today=day.date,
            day_index=k,
            today_open=day.open,
            market_history=dataset.market[: start_idx + k],
            txn_stats_history=dataset.txn_stats[: _count_upto(txn_dates, cutoff)],
            news_history={d: dataset.news[d] for d in news_dates[: _count_upto(news_dates, cutoff)]},
            portfolio=state,
            past_decisions=tuple(past),
        )
        try:
            raw = strategy(ctx)
        except StrategyError:
            raise
        except Exception as exc:
            raise StrategyError(f"{day.date}: strategy failed: {exc}") from exc
        action = _as_action(raw, day.date)
        state, fee_paid = execute_action(state, day.open, action, fee)
        records.append(
            RunRecord(
                date=day.date,
                execution_price=day.open,
                action=action.fraction,
                fee_paid=fee_paid,
                post_cash=state.cash,
                post_holdings=state.holdings,
                net_worth=state.net_worth(day.open),
                pre_trade_net_worth=capital if k == 0 else pre,
            )
        )

    meta = {
        "asset": split.asset,
        "split": split.name,
        "start": split.start.isoformat(),
        "end": split.end.isoformat(),
        "fee_rate": fee.rate,
        "capital": capital,
        "info_lag": info_lag,
    }
    meta.update(metadata or {})
    return RunResult(
        records=records,
        start_net_worth=capital,
        final_net_worth=state.net_worth(valuation.open),
        valuation_date=valuation.date,
        valuation_price=valuation.open,
        metadata=meta,
    )


def _count_upto(sorted_dates: Sequence[date], cutoff: date) -> int:
    return bisect_right(sorted_dates, cutoff)
