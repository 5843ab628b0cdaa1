"""Windowed price indicators: SMA, EMA, MACD, Bollinger Bands.

Outputs are plain lists aligned index-for-index with the input series. Values
that are undefined during warm-up are ``None``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class MacdPoint:
    macd: float
    signal: float
    histogram: float


@dataclass(frozen=True)
class BollingerPoint:
    middle: float
    upper: float
    lower: float


def _as_prices(series: Sequence[float]) -> np.ndarray:
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 1:
        raise ValueError("price series must be one-dimensional")
    if arr.size and not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
        raise ValueError("prices must be finite and > 0")
    return arr


def sma(series: Sequence[float], window: int) -> list[float | None]:
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    arr = _as_prices(series)
    out: list[float | None] = [None] * min(window - 1, arr.size)
    if arr.size >= window:
        out.extend(_window_means(sliding_window_view(arr, window)).tolist())
    return out


def _window_means(windows: np.ndarray) -> np.ndarray:
    # shift by each window's first value so constant windows come out exact
    anchor = windows[:, 0]
    return anchor + (windows - anchor[:, None]).mean(axis=1)


def ema(series: Sequence[float], window: int) -> list[float]:
    """EMA seeded with the first value, alpha = 2 / (window + 1)."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if len(series) == 0:
        raise ValueError("ema of an empty series")
    return _ema_unchecked([float(p) for p in _as_prices(series)], window)


def _ema_unchecked(values: Sequence[float], window: int) -> list[float]:
    # used for the MACD line, which may be zero or negative
    if window == 1:
        return list(values)
    alpha = 2.0 / (window + 1)
    out = [values[0]]
    for v in values[1:]:
        out.append(out[-1] + alpha * (v - out[-1]))
    return out


def macd(series: Sequence[float], fast: int = 12, slow: int = 26, signal: int = 9) -> list[MacdPoint]:
    if not 1 <= fast < slow:
        raise ValueError(f"need 1 <= fast < slow, got fast={fast}, slow={slow}")
    if signal < 1:
        raise ValueError(f"signal window must be >= 1, got {signal}")
    fast_ema = ema(series, fast)
    slow_ema = ema(series, slow)
    line = [f - s for f, s in zip(fast_ema, slow_ema)]
    sig = _ema_unchecked(line, signal)
    return [MacdPoint(m, s, m - s) for m, s in zip(line, sig)]


def bollinger(series: Sequence[float], window: int = 20, multiplier: float = 2.0) -> list[BollingerPoint | None]:
    """Trailing SMA with bands at +/- multiplier population standard deviations."""
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    if not (math.isfinite(multiplier) and multiplier > 0):
        raise ValueError(f"multiplier must be > 0, got {multiplier}")
    arr = _as_prices(series)
    out: list[BollingerPoint | None] = [None] * min(window - 1, arr.size)
    if arr.size >= window:
        windows = sliding_window_view(arr, window)
        mid = _window_means(windows)
        half = multiplier * np.sqrt(((windows - mid[:, None]) ** 2).mean(axis=1))
        out.extend(BollingerPoint(m, m + h, m - h) for m, h in zip(mid.tolist(), half.tolist()))
    return out
