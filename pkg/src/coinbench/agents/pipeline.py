"""Daily agent pipeline: market and news analysts, reflection, trading decision."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Mapping, Sequence

from .. import indicators
from ..engine import HOLD, DecisionContext, TradeAction
from .backend import Backend, BackendError, ModelExchange
from .prompts import (
    BASE_TEMPLATE,
    MARKET_SYSTEM,
    NEWS_SYSTEM,
    REFLECTION_SYSTEM,
    RETRY_INSTRUCTION,
    TRADING_SYSTEM,
    AblationConfig,
    PromptBundle,
)

log = logging.getLogger(__name__)

REFLECTION_DAYS = 7
DEFAULT_RECENT_PRICES = 7
DEFAULT_PARSE_RETRIES = 2


class ActionParseError(ValueError):
    pass


@dataclass(frozen=True)
class AnalystReport:
    kind: str  # market | news | reflection
    text: str
    source_window: tuple[date, date] | None
    insufficient: bool = False
    truncated: bool = False

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("report text must be non-empty")


def _fmt(value: float | None, unit: str = "") -> str:
    return "n/a" if value is None else f"{value:.2f}{unit}"


def market_report_prompt(ctx: DecisionContext) -> str | None:
    """Indicator summary over opens strictly before today; ``None`` without history."""
    history = ctx.market_history
    if not history:
        return None
    opens = [d.open for d in history]
    last = lambda xs: xs[-1] if xs else None  # noqa: E731
    m = indicators.macd(opens)[-1]
    bb = last(indicators.bollinger(opens, 20, 2.0)) if len(opens) >= 2 else None
    lines = [
        f"Daily open-price indicators up to {history[-1].date.isoformat()} ({len(opens)} days of history):",
        f"Last open: {opens[-1]:.2f}",
        f"SMA(5): {_fmt(last(indicators.sma(opens, 5)))}",
        f"SMA(20): {_fmt(last(indicators.sma(opens, 20)))}",
        f"EMA(12): {_fmt(indicators.ema(opens, 12)[-1])}",
        f"EMA(26): {_fmt(indicators.ema(opens, 26)[-1])}",
        f"MACD: {m.macd:.2f}",
        f"MACD signal: {m.signal:.2f}",
        f"MACD histogram: {m.histogram:.2f}",
    ]
    if bb is None:
        lines.append("Bollinger(20, 2): n/a")
    else:
        lines.append(f"Bollinger(20, 2): lower {bb.lower:.2f}, middle {bb.middle:.2f}, upper {bb.upper:.2f}")
    if len(opens) >= 2:
        change = opens[-1] / opens[-2] - 1
        lines.append(f"Last one-day change: {change * 100:+.2f}%")
    return "\n".join(lines) + "\n\nSummarise the market's direction and momentum."


def build_market_report(ctx: DecisionContext, backend: Backend, audit: list | None = None) -> AnalystReport:
    prompt = market_report_prompt(ctx)
    if prompt is None:
        return AnalystReport("market", "Insufficient price history for technical indicators.", None, insufficient=True)
    exchange = backend.complete(MARKET_SYSTEM, prompt, purpose="market", day_index=ctx.day_index)
    if audit is not None:
        audit.append(exchange)
    window = (ctx.market_history[0].date, ctx.market_history[-1].date)
    return AnalystReport("market", exchange.response or "(empty response)", window)


@dataclass(frozen=True)
class NewsBudget:
    window_days: int = 1
    lag_days: int = 1
    total_chars: int = 6000
    article_chars: int = 1200


def news_window(ctx: DecisionContext, budget: NewsBudget) -> tuple[date, date]:
    last = ctx.today - timedelta(days=budget.lag_days)
    return last - timedelta(days=budget.window_days - 1), last


def news_report_prompt(ctx: DecisionContext, budget: NewsBudget = NewsBudget()) -> tuple[str | None, bool]:
    """Return ``(prompt, truncated)``; prompt is ``None`` when the window holds no news.

    Each article body keeps only its head up to ``article_chars``; if the total
    still exceeds ``total_chars``, the oldest articles are dropped first.
    """
    first, last = news_window(ctx, budget)
    items = [item for d, group in ctx.news_history.items() if first <= d <= last for item in group]
    if not items:
        return None, False
    truncated = False
    blocks = []
    for item in items:
        text = item.text
        if len(text) > budget.article_chars:
            text, truncated = text[: budget.article_chars] + " [...]", True
        blocks.append(f"[{item.date.isoformat()}] {item.source}: {item.title}\n{text}")
    while len(blocks) > 1 and sum(len(b) + 2 for b in blocks) > budget.total_chars:
        blocks.pop(0)
        truncated = True
    if len(blocks[0]) > budget.total_chars:
        blocks[0], truncated = blocks[0][: budget.total_chars], True
    body = "\n\n".join(blocks)
    return f"News articles from {first.isoformat()} to {last.isoformat()}:\n\n{body}\n\nSummarise the key events and their likely market impact.", truncated


def build_news_report(
    ctx: DecisionContext, backend: Backend, budget: NewsBudget = NewsBudget(), audit: list | None = None
) -> AnalystReport:
    prompt, truncated = news_report_prompt(ctx, budget)
    window = news_window(ctx, budget)
    if prompt is None:
        return AnalystReport("news", "No recent news.", window)
    if truncated:
        log.info("%s: news input truncated to %d characters", ctx.today, budget.total_chars)
    exchange = backend.complete(NEWS_SYSTEM, prompt, purpose="news", day_index=ctx.day_index)
    if audit is not None:
        audit.append(exchange)
    return AnalystReport("news", exchange.response or "(empty response)", window, truncated=truncated)


def txn_stats_text(ctx: DecisionContext, days: int = REFLECTION_DAYS) -> str:
    rows = ctx.txn_stats_history[-days:]
    if not rows:
        return "No on-chain statistics available."
    lines = ["Daily on-chain statistics (most recent last):"]
    for r in rows:
        lines.append(
            f"{r.date.isoformat()}: transactions={r.num_transactions}, active_wallets={r.active_wallets}, "
            f"value_transferred={r.total_value_transferred:.2f}, avg_gas_price={r.avg_gas_price:.2f}, "
            f"gas_consumed={r.total_gas_consumed:.0f}"
        )
    return "\n".join(lines)


@dataclass(frozen=True)
class ReflectionEntry:
    date: date
    exchange: ModelExchange
    action: float
    daily_return: float


def reflection_prompt(history: Sequence[ReflectionEntry], prompt_chars: int = 1500) -> str:
    lines = [f"Your last {len(history)} trading day(s), oldest first:"]
    for entry in history:
        prompt = entry.exchange.user_prompt
        if len(prompt) > prompt_chars:
            prompt = prompt[:prompt_chars] + " [...]"
        lines += [
            "",
            f"Day {entry.date.isoformat()}: action {entry.action:+.4f}, realised return {entry.daily_return * 100:+.2f}%",
            "Prompt:",
            prompt,
            "Response:",
            entry.exchange.response,
        ]
    lines += ["", "Which information was most impactful for these outcomes, and why?"]
    return "\n".join(lines)


def run_reflection(
    history: Sequence[ReflectionEntry], backend: Backend, day_index: int | None = None, audit: list | None = None
) -> AnalystReport | None:
    """Reflect on ``history``; ``None`` when it is empty or the backend fails."""
    if not history:
        return None
    try:
        exchange = backend.complete(REFLECTION_SYSTEM, reflection_prompt(history), purpose="reflection", day_index=day_index)
    except BackendError as exc:
        log.warning("reflection skipped: %s", exc)
        return None
    if audit is not None:
        audit.append(exchange)
    return AnalystReport("reflection", exchange.response or "(empty response)", (history[0].date, history[-1].date))


def base_section(ctx: DecisionContext, asset: str, n_prices: int = DEFAULT_RECENT_PRICES) -> str:
    days = [(d.date, d.open) for d in ctx.market_history[-(n_prices - 1):]] if n_prices > 1 else []
    days.append((ctx.today, ctx.today_open))
    prices = "\n".join(f"{d.isoformat()}: {p:.2f}" for d, p in days)
    return BASE_TEMPLATE.format(
        asset=asset,
        today=ctx.today.isoformat(),
        cash=ctx.portfolio.cash,
        holdings=ctx.portfolio.holdings,
        prices=prices,
    )


PLACEHOLDERS = {
    "technical": "No technical report available.",
    "news": "No recent news.",
    "reflection": "No earlier decisions to reflect on yet.",
}


def build_trading_prompt(
    ctx: DecisionContext,
    reports: Mapping[str, AnalystReport],
    config: AblationConfig,
    asset: str = "the asset",
    n_prices: int = DEFAULT_RECENT_PRICES,
) -> PromptBundle:
    """Assemble exactly the sections the ablation config enables."""
    flags = config.flags

    def section(flag: str, report_kind: str) -> str | None:
        if flag not in flags:
            return None
        report = reports.get(report_kind)
        return report.text if report is not None else PLACEHOLDERS[flag]

    return PromptBundle(
        base=base_section(ctx, asset, n_prices),
        technical=section("technical", "market"),
        news=section("news", "news"),
        txn_stats=txn_stats_text(ctx) if "txn_stats" in flags else None,
        reflection=section("reflection", "reflection"),
        flags=flags,
    )


_NUMBER = re.compile(r"(?<![\w.\-])[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?(?!\w)")
ACTION_KEYWORDS = ("action", "decision")


def _in_range(line: str) -> list[float]:
    out = []
    for m in _NUMBER.finditer(line):
        value = float(m.group())
        if -1.0 <= value <= 1.0:
            out.append(value)
    return out


def parse_action(response: str, keywords: Sequence[str] = ACTION_KEYWORDS) -> TradeAction:
    """Pull the decision out of a model response.

    The last in-range number on the last keyword line wins; without one, the
    last in-range number anywhere in the response.
    """
    lines = response.splitlines()
    lowered = [k.lower() for k in keywords]
    for line in reversed(lines):
        if any(k in line.lower() for k in lowered):
            values = _in_range(line)
            if values:
                return TradeAction(values[-1])
    values = _in_range(response)
    if values:
        return TradeAction(values[-1])
    raise ActionParseError(f"no number in [-1, 1] found in response: {response[:120]!r}")


@dataclass
class AgentStrategy:
    """Stateful decision function for :func:`coinbench.engine.run_backtest`.

    Keeps the audit log of every model exchange and the trading history the
    reflection step reviews. Use a fresh instance per run.
    """

    config: AblationConfig
    backend: Backend
    asset: str = "the asset"
    n_prices: int = DEFAULT_RECENT_PRICES
    news_budget: NewsBudget = NewsBudget()
    parse_retries: int = DEFAULT_PARSE_RETRIES
    audit: list[ModelExchange] = field(default_factory=list)
    prompts: list[str] = field(default_factory=list)
    parse_failures: int = 0
    _decisions: list[tuple[date, ModelExchange, float]] = field(default_factory=list)

    def reflection_history(self, ctx: DecisionContext) -> list[ReflectionEntry]:
        realised = {p.date: p.daily_return for p in ctx.past_decisions}
        since = ctx.today - timedelta(days=REFLECTION_DAYS)
        return [
            ReflectionEntry(d, ex, a, realised[d])
            for d, ex, a in self._decisions
            if since <= d < ctx.today and d in realised
        ]

    def __call__(self, ctx: DecisionContext) -> TradeAction:
        flags = self.config.flags
        reports: dict[str, AnalystReport] = {}
        if "technical" in flags:
            reports["market"] = build_market_report(ctx, self.backend, self.audit)
        if "news" in flags:
            reports["news"] = build_news_report(ctx, self.backend, self.news_budget, self.audit)
        if "reflection" in flags:
            report = run_reflection(self.reflection_history(ctx), self.backend, ctx.day_index, self.audit)
            if report is not None:
                reports["reflection"] = report
        prompt = build_trading_prompt(ctx, reports, self.config, self.asset, self.n_prices).render()
        self.prompts.append(prompt)

        action, exchange, user = None, None, prompt
        for attempt in range(self.parse_retries + 1):
            exchange = self.backend.complete(TRADING_SYSTEM, user, purpose="trading", day_index=ctx.day_index)
            self.audit.append(exchange)
            try:
                action = parse_action(exchange.response)
                break
            except ActionParseError as exc:
                log.warning("%s: unparseable action (attempt %d): %s", ctx.today, attempt + 1, exc)
                user = f"{prompt}\n{RETRY_INSTRUCTION}"
        if action is None:
            self.parse_failures += 1
            log.warning("%s: falling back to hold after %d attempts", ctx.today, self.parse_retries + 1)
            action = HOLD
        self._decisions.append((ctx.today, exchange, action.fraction))
        return action

    def audit_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.audit)

    def write_audit(self, path: str | Path) -> None:
        Path(path).write_text(self.audit_jsonl(), encoding="utf-8")


def agent_strategy(config: AblationConfig | str, backend: Backend, **kwargs) -> AgentStrategy:
    if isinstance(config, str):
        config = AblationConfig(config)
    return AgentStrategy(config=config, backend=backend, **kwargs)
