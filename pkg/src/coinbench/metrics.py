"""Return, daily-return statistics, Sharpe ratio, and comparison tables.

Daily returns are taken over the valuation sequence of a run: net worth at
each trading day's open before trading, followed by the end-date valuation.
An n-day run therefore has n daily returns and compounds exactly to the
total return.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

if TYPE_CHECKING:
    from .engine import RunResult


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsSummary:
    total_return: float  # percent
    daily_return_mean: float  # percent
    daily_return_std: float  # percent, sample (n-1)
    sharpe: float
    sharpe_degenerate: bool = False
    num_days: int = 0


def total_return(result: RunResult) -> float:
    w_start, w_end = result.start_net_worth, result.final_net_worth
    if w_start <= 0:
        raise MetricsError(f"starting net worth must be > 0, got {w_start}")
    return (w_end - w_start) / w_start * 100.0


def returns_from_net_worth(values: Sequence[float]) -> list[float]:
    if any(w <= 0 for w in values):
        raise MetricsError("net worth must stay > 0 to form daily returns")
    return [cur / prev - 1.0 for prev, cur in zip(values, values[1:])]


def daily_returns(result: RunResult) -> list[float]:
    return returns_from_net_worth(result.valuation_sequence())


def sharpe_from_returns(returns: Sequence[float], risk_free: float = 0.0) -> tuple[float, bool]:
    """Return ``(sharpe, degenerate)``; degenerate means zero dispersion, reported as 0."""
    if len(returns) < 2:
        raise MetricsError(f"Sharpe needs at least 2 daily returns, got {len(returns)}")
    std = statistics.stdev(returns)
    if std == 0:
        return 0.0, True
    return (statistics.fmean(returns) - risk_free) / std, False


def sharpe(result: RunResult, risk_free: float = 0.0) -> float:
    return sharpe_from_returns(daily_returns(result), risk_free)[0]


def summarize(result: RunResult, risk_free: float = 0.0) -> MetricsSummary:
    rets = daily_returns(result)
    if len(rets) >= 2:
        value, degenerate = sharpe_from_returns(rets, risk_free)
        std = statistics.stdev(rets)
    else:
        value, degenerate, std = 0.0, True, 0.0
    return MetricsSummary(
        total_return=total_return(result),
        daily_return_mean=statistics.fmean(rets) * 100.0,
        daily_return_std=std * 100.0,
        sharpe=value,
        sharpe_degenerate=degenerate,
        num_days=len(rets),
    )


TABLE_HEADER = ("Strategy", "Total Return (%)", "Daily Return (%)", "Sharpe Ratio")


def _num(x: float) -> str:
    text = f"{x:.2f}"
    return "0.00" if text == "-0.00" else text


def _cells(s: MetricsSummary) -> list[str]:
    return [_num(s.total_return), f"{_num(s.daily_return_mean)}±{_num(s.daily_return_std)}", _num(s.sharpe)]


def _emit(header: Sequence[str], rows: list[list[str]], fmt: str) -> str:
    if fmt == "md":
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    raise ValueError(f"unknown table format {fmt!r}")


def render_table(results: Sequence[tuple[str, MetricsSummary]], fmt: str = "md") -> str:
    """One row per labelled summary, in input order."""
    return _emit(TABLE_HEADER, [[label] + _cells(s) for label, s in results], fmt)


def render_matrix(
    results: Mapping[str, Mapping[str, MetricsSummary]],
    conditions: Sequence[str],
    fmt: str = "md",
) -> str:
    """Wide layout: metric groups across, one column per market condition within each group.

    Missing (strategy, condition) cells render as ``-``.
    """
    header = ["Strategy"]
    for metric in TABLE_HEADER[1:]:
        header += [f"{metric} {c}" for c in conditions]
    rows = []
    for label, per_cond in results.items():
        cells = [_cells(per_cond[c]) if c in per_cond else ["-", "-", "-"] for c in conditions]
        rows.append([label] + [cell[i] for i in range(3) for cell in cells])
    return _emit(header, rows, fmt)
