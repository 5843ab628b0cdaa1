"""Loading, validation, and slicing of daily market, on-chain, and news data.

File formats
------------
Market CSV::

    date,open,high,low,close,volume,market_cap
    2023-10-01,1671.0,1720.5,1660.1,1700.2,5400000000.0,200000000000.0

Transaction-statistics CSV (lines starting with ``#`` are comments; the unit of
``total_value_transferred`` is declared as ``# total_value_transferred_unit: ETH``)::

    date,num_transactions,active_wallets,total_value_transferred,avg_gas_price,total_gas_consumed

News JSONL, one object per line with keys ``date``, ``source``, ``title``,
``text`` and an optional ``url``.

Split CSV::

    asset,name,start,end
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

MARKET_COLUMNS = ("date", "open", "high", "low", "close", "volume", "market_cap")
TXN_COLUMNS = (
    "date",
    "num_transactions",
    "active_wallets",
    "total_value_transferred",
    "avg_gas_price",
    "total_gas_consumed",
)
SPLIT_COLUMNS = ("asset", "name", "start", "end")
UNIT_COMMENT_KEY = "total_value_transferred_unit"


class DataError(ValueError):
    """Raised for malformed, inconsistent, or incomplete input data."""


@dataclass(frozen=True)
class MarketDay:
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float
    market_cap: float

    def __post_init__(self):
        for name in MARKET_COLUMNS[1:]:
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise DataError(f"{self.date}: {name} must be finite and > 0, got {value!r}")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise DataError(f"{self.date}: low/high do not bracket open/close")


@dataclass(frozen=True)
class TxnStatsDay:
    date: date
    num_transactions: int
    active_wallets: int
    total_value_transferred: float
    avg_gas_price: float
    total_gas_consumed: float

    def __post_init__(self):
        for name in TXN_COLUMNS[1:]:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DataError(f"{self.date}: {name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class NewsItem:
    date: date
    source: str
    title: str
    text: str  # full body or a pre-made summary
    url: str | None = None

    def __post_init__(self):
        if not self.title.strip():
            raise DataError(f"{self.date}: news title is empty")
        if not self.text.strip():
            raise DataError(f"{self.date}: news text is empty")


@dataclass(frozen=True)
class SplitSpec:
    asset: str
    name: str
    start: date
    end: date

    def __post_init__(self):
        if self.start >= self.end:
            raise DataError(f"split {self.asset}/{self.name}: start {self.start} must precede end {self.end}")

    @property
    def num_trading_days(self) -> int:
        return (self.end - self.start).days


@dataclass(frozen=True)
class Dataset:
    """Date-aligned market, on-chain, and news data for one asset.

    ``news`` is exposed as a read-only mapping of date to a tuple of items.
    """

    market: tuple[MarketDay, ...]
    txn_stats: tuple[TxnStatsDay, ...] = ()
    news: Mapping[date, tuple[NewsItem, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "market", tuple(self.market))
        object.__setattr__(self, "txn_stats", tuple(self.txn_stats))
        object.__setattr__(
            self, "news", MappingProxyType({d: tuple(v) for d, v in sorted(self.news.items())})
        )
        _check_strictly_increasing([d.date for d in self.market], "market")
        _check_strictly_increasing([d.date for d in self.txn_stats], "txn_stats")
        if self.market:
            last = self.market[-1].date
            if self.txn_stats and self.txn_stats[-1].date > last:
                raise DataError(f"txn_stats extend past the market range ({self.txn_stats[-1].date} > {last})")
            if self.news and max(self.news) > last:
                raise DataError(f"news extend past the market range ({max(self.news)} > {last})")
        object.__setattr__(self, "_index", {d.date: i for i, d in enumerate(self.market)})

    def index_of(self, day: date) -> int:
        try:
            return self._index[day]
        except KeyError:
            raise DataError(f"date {day} not present in market series") from None


def _check_strictly_increasing(dates: Sequence[date], label: str) -> None:
    for prev, cur in zip(dates, dates[1:]):
        if cur <= prev:
            raise DataError(f"{label} dates not strictly increasing at {cur}")


def _parse_date(text: str, where: str) -> date:
    try:
        return date.fromisoformat(text.strip())
    except (ValueError, AttributeError):
        raise DataError(f"{where}: malformed date {text!r}") from None


def _parse_number(text: str, name: str, where: str, kind=float):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DataError(f"{where}: field {name!r} is not a number: {text!r}") from None
    if kind is int:
        if not value.is_integer():
            raise DataError(f"{where}: field {name!r} must be an integer count, got {text!r}")
        return int(value)
    return value


def _read_rows(path: Path, columns: Sequence[str]) -> Iterable[tuple[int, dict]]:
    """Yield (line number, row) pairs, skipping comment and blank lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [(n, line) for n, line in enumerate(fh, start=1) if line.strip() and not line.startswith("#")]
    if not lines:
        return
    reader = csv.reader([line for _, line in lines])
    header = [h.strip() for h in next(reader)]
    missing = [c for c in columns if c not in header]
    if missing:
        raise DataError(f"{path}:{lines[0][0]}: missing required column(s) {', '.join(missing)}")
    for (lineno, _), values in zip(lines[1:], reader):
        if len(values) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(values)}")
        yield lineno, dict(zip(header, values))


def _sorted_unique(rows: list, path: Path, label: str) -> tuple:
    rows.sort(key=lambda pair: pair[1].date)
    for (_, prev), (lineno, cur) in zip(rows, rows[1:]):
        if cur.date == prev.date:
            raise DataError(f"{path}:{lineno}: duplicate {label} date {cur.date}")
    return tuple(item for _, item in rows)


def load_market_csv(path: str | Path) -> tuple[MarketDay, ...]:
    path = Path(path)
    rows = []
    for lineno, raw in _read_rows(path, MARKET_COLUMNS):
        where = f"{path}:{lineno}"
        values = {c: _parse_number(raw[c], c, where) for c in MARKET_COLUMNS[1:]}
        try:
            day = MarketDay(date=_parse_date(raw["date"], where), **values)
        except DataError as exc:
            raise DataError(f"{where}: {exc}") from None
        rows.append((lineno, day))
    return _sorted_unique(rows, path, "market")


def load_txn_stats_csv(path: str | Path) -> tuple[TxnStatsDay, ...]:
    path = Path(path)
    rows = []
    for lineno, raw in _read_rows(path, TXN_COLUMNS):
        where = f"{path}:{lineno}"
        values = {}
        for c in TXN_COLUMNS[1:]:
            kind = int if c in ("num_transactions", "active_wallets") else float
            values[c] = _parse_number(raw[c], c, where, kind)
            if values[c] < 0:
                raise DataError(f"{where}: field {c!r} must be >= 0, got {raw[c]!r}")
        try:
            rows.append((lineno, TxnStatsDay(date=_parse_date(raw["date"], where), **values)))
        except DataError as exc:
            raise DataError(f"{where}: {exc}") from None
    return _sorted_unique(rows, path, "txn_stats")


def read_header_comments(path: str | Path) -> dict[str, str]:
    """Return ``key: value`` pairs from leading ``#`` comment lines."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, sep, value = line[1:].partition(":")
            if sep:
                out[key.strip()] = value.strip()
    return out


def load_news_jsonl(path: str | Path) -> dict[date, tuple[NewsItem, ...]]:
    path = Path(path)
    grouped: dict[date, list[NewsItem]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{where}: expected a JSON object")
            for key in ("date", "title", "text"):
                if not obj.get(key):
                    raise DataError(f"{where}: missing {key!r}")
            try:
                item = NewsItem(
                    date=_parse_date(obj["date"], where),
                    source=str(obj.get("source", "")),
                    title=str(obj["title"]),
                    text=str(obj["text"]),
                    url=obj.get("url"),
                )
            except DataError as exc:
                raise DataError(f"{where}: {exc}") from None
            grouped.setdefault(item.date, []).append(item)
    return {d: tuple(grouped[d]) for d in sorted(grouped)}


def load_dataset(market: str | Path, txn_stats: str | Path | None = None, news: str | Path | None = None) -> Dataset:
    return Dataset(
        market=load_market_csv(market),
        txn_stats=load_txn_stats_csv(txn_stats) if txn_stats else (),
        news=load_news_jsonl(news) if news else {},
    )


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def dump_market_csv(days: Iterable[MarketDay]) -> str:
    """Canonical CSV text: sorted by date, shortest round-trip float repr, ``\\n`` line ends."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MARKET_COLUMNS)
    for d in sorted(days, key=lambda d: d.date):
        writer.writerow([d.date.isoformat()] + [_fmt(getattr(d, c)) for c in MARKET_COLUMNS[1:]])
    return buf.getvalue()


def dump_txn_stats_csv(days: Iterable[TxnStatsDay], unit: str | None = None) -> str:
    buf = io.StringIO()
    if unit:
        buf.write(f"# {UNIT_COMMENT_KEY}: {unit}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TXN_COLUMNS)
    for d in sorted(days, key=lambda d: d.date):
        writer.writerow([d.date.isoformat()] + [_fmt(getattr(d, c)) for c in TXN_COLUMNS[1:]])
    return buf.getvalue()


def dump_news_jsonl(news: Mapping[date, Sequence[NewsItem]]) -> str:
    lines = []
    for d in sorted(news):
        for item in news[d]:
            obj = {"date": d.isoformat(), "source": item.source, "title": item.title, "text": item.text}
            if item.url is not None:
                obj["url"] = item.url
            lines.append(json.dumps(obj, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def slice_split(dataset: Dataset, split: SplitSpec) -> tuple[list[MarketDay], MarketDay]:
    """Return the trading days in ``[start, end)`` and the valuation day ``end``.

    Every calendar day of ``[start, end]`` must be present; gaps are an error.
    """
    first = dataset.index_of(split.start)
    last = dataset.index_of(split.end)
    span = dataset.market[first : last + 1]
    expected = split.num_trading_days + 1
    if len(span) != expected:
        have = {d.date for d in span}
        for k in range(expected):
            day = split.start + timedelta(days=k)
            if day not in have:
                raise DataError(f"split {split.asset}/{split.name}: missing market day {day}")
    return list(span[:-1]), span[-1]


def load_splits(path: str | Path | None = None) -> list[SplitSpec]:
    """Load a split table; with no path, the bundled default table is used."""
    if path is None:
        text = resources.files("coinbench").joinpath("data/splits.csv").read_text(encoding="utf-8")
        source = "<default splits>"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in SPLIT_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise DataError(f"{source}: missing required column(s) {', '.join(missing)}")
    splits = []
    for lineno, row in enumerate(reader, start=2):
        where = f"{source}:{lineno}"
        splits.append(
            SplitSpec(
                asset=row["asset"].strip(),
                name=row["name"].strip(),
                start=_parse_date(row["start"], where),
                end=_parse_date(row["end"], where),
            )
        )
    return splits


def get_split(asset: str, name: str, splits: Sequence[SplitSpec] | None = None) -> SplitSpec:
    for s in splits if splits is not None else load_splits():
        if s.asset == asset and s.name == name:
            return s
    raise DataError(f"unknown split {asset}/{name}")
