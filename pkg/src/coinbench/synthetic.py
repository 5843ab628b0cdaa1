"""Seeded synthetic market data.

``anchored_market`` builds a daily OHLCV path whose open prices hit given
values on given dates (log-price Brownian bridges between anchors). The
bundled ``data/`` files are produced this way with the split endpoints as
anchors: opens on each split's start and end date equal the published
start-open and end-price, and so does the end-date close wherever the next
day is not itself anchored. Everything else is simulated.
"""

from __future__ import annotations

import math
from datetime import date, timedelta

import numpy as np

from .dataio import Dataset, MarketDay, NewsItem, TxnStatsDay

# asset -> split name -> (start open, end price) in USD
SPLIT_ENDPOINTS = {
    "BTC": {
        "validation": (20977.48, 20628.03),
        "bearish": (30462.48, 25575.28),
        "sideways": (26328.68, 26163.68),
        "bullish": (26967.40, 37718.01),
    },
    "ETH": {
        "validation": (1417.13, 1429.60),
        "bearish": (1892.94, 1664.98),
        "sideways": (1734.79, 1705.11),
        "bullish": (1671.00, 2051.76),
    },
    "SOL": {
        "validation": (18.29, 18.24),
        "bearish": (23.02, 14.76),
        "sideways": (21.49, 20.83),
        "bullish": (21.39, 59.25),
    },
}
DAILY_VOL = {"BTC": 0.025, "ETH": 0.03, "SOL": 0.05}
SUPPLY = {"BTC": 19.4e6, "ETH": 120.2e6, "SOL": 410e6}
PRICE_DECIMALS = {"BTC": 2, "ETH": 2, "SOL": 4}
NATIVE_UNIT = {"BTC": "BTC", "ETH": "ETH", "SOL": "SOL"}


def _bridge(rng: np.random.Generator, a: float, b: float, steps: int, vol: float) -> np.ndarray:
    """Log-price path of ``steps + 1`` points from ``log a`` to ``log b``."""
    walk = np.concatenate([[0.0], np.cumsum(rng.normal(0.0, vol, steps))])
    t = np.arange(steps + 1) / steps
    return math.log(a) + walk - t * walk[-1] + t * (math.log(b) - math.log(a))


def anchored_opens(
    anchors: dict[date, float], first: date, last: date, vol: float, rng: np.random.Generator
) -> list[float]:
    points = sorted(anchors.items())
    n = (last - first).days + 1
    logp = np.empty(n)
    d0, p0 = points[0]
    i0 = (d0 - first).days
    # free random walk before the first anchor, run backwards from it
    back = np.cumsum(rng.normal(0.0, vol, i0))[::-1]
    logp[:i0] = math.log(p0) + back
    for (da, pa), (db, pb) in zip(points, points[1:]):
        ia, ib = (da - first).days, (db - first).days
        logp[ia : ib + 1] = _bridge(rng, pa, pb, ib - ia, vol)
    dl, pl = points[-1]
    il = (dl - first).days
    logp[il:] = math.log(pl) + np.concatenate([[0.0], np.cumsum(rng.normal(0.0, vol, n - il - 1))])
    opens = np.exp(logp)
    for d, p in points:
        opens[(d - first).days] = p
    return opens.tolist()


def market_from_opens(
    opens: list[float], first: date, rng: np.random.Generator, vol: float, supply: float, decimals: int = 2
) -> list[MarketDay]:
    opens = [round(p, decimals) for p in opens]
    closes = opens[1:] + [round(opens[-1] * math.exp(rng.normal(0.0, vol)), decimals)]
    days = []
    for k, (o, c) in enumerate(zip(opens, closes)):
        hi = round(max(o, c) * math.exp(abs(rng.normal(0.0, vol / 2))), decimals)
        lo = round(min(o, c) * math.exp(-abs(rng.normal(0.0, vol / 2))), decimals)
        volume = round(float(supply * o * 0.02 * rng.lognormal(0.0, 0.3)), 2)
        days.append(MarketDay(first + timedelta(days=k), o, hi, lo, c, volume, round(o * supply, 2)))
    return days


def anchored_market(
    asset: str, first: date = date(2022, 11, 1), last: date = date(2023, 12, 31), seed: int = 0
) -> list[MarketDay]:
    from .dataio import load_splits

    anchors = {}
    for s in load_splits():
        if s.asset == asset:
            start_open, end_price = SPLIT_ENDPOINTS[asset][s.name]
            anchors[s.start] = start_open
            anchors[s.end] = end_price
    for s in load_splits():
        # closes equal the next open, so pinning the following day fixes the end-date close too
        if s.asset == asset and s.end + timedelta(days=1) not in anchors:
            anchors[s.end + timedelta(days=1)] = SPLIT_ENDPOINTS[asset][s.name][1]
    rng = np.random.default_rng(seed)
    vol = DAILY_VOL[asset]
    opens = anchored_opens(anchors, first, last, vol, rng)
    return market_from_opens(opens, first, rng, vol, SUPPLY[asset], PRICE_DECIMALS[asset])


def synthetic_txn_stats(market: list[MarketDay], seed: int = 0) -> list[TxnStatsDay]:
    rng = np.random.default_rng(seed + 1)
    out = []
    for d in market:
        n = int(1_000_000 * rng.lognormal(0.0, 0.1))
        out.append(
            TxnStatsDay(
                date=d.date,
                num_transactions=n,
                active_wallets=int(n * rng.uniform(0.3, 0.5)),
                total_value_transferred=round(float(n * rng.lognormal(0.0, 0.5)), 2),
                avg_gas_price=round(float(20 * rng.lognormal(0.0, 0.3)), 3),
                total_gas_consumed=float(int(n * 60_000 * rng.lognormal(0.0, 0.1))),
            )
        )
    return out


def synthetic_news(market: list[MarketDay], asset: str, every: int = 3) -> dict[date, tuple[NewsItem, ...]]:
    """Placeholder items describing the simulated price move, one every ``every`` days."""
    news = {}
    for prev, cur in list(zip(market, market[1:]))[::every]:
        change = (cur.close / prev.close - 1) * 100
        news[cur.date] = (
            NewsItem(
                date=cur.date,
                source="synthetic",
                title=f"{asset} closes {change:+.2f}% on {cur.date.isoformat()}",
                text=(
                    f"Synthetic placeholder article. {asset} moved from {prev.close} to {cur.close} USD, "
                    f"with {cur.volume:.0f} USD traded."
                ),
            ),
        )
    return news


def random_walk_dataset(
    seed: int, n_days: int = 120, first: date = date(2023, 1, 1), vol: float = 0.03, drift: float = 0.0, p0: float = 100.0
) -> Dataset:
    """Geometric random walk with no anchors, for tests and experiments."""
    rng = np.random.default_rng(seed)
    logp = math.log(p0) + np.concatenate([[0.0], np.cumsum(rng.normal(drift, vol, n_days - 1))])
    return Dataset(market=market_from_opens(np.exp(logp).tolist(), first, rng, vol, 1e6, 6))
