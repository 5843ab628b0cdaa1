import math
import statistics
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coinbench.indicators import bollinger, ema, macd, sma

prices = st.lists(st.floats(0.01, 1e6, allow_nan=False), min_size=1, max_size=80)


def brute_sma(xs, w):
    return [None if t < w - 1 else math.fsum(xs[t - w + 1 : t + 1]) / w for t in range(len(xs))]


def brute_ema(xs, w):
    """Closed form: (1-a)^t p0 + sum_k a (1-a)^(t-k) p_k, in exact rationals."""
    a = Fraction(2, w + 1)
    fx = [Fraction(x) for x in xs]
    out = []
    for t in range(len(fx)):
        total = (1 - a) ** t * fx[0] + sum(a * (1 - a) ** (t - k) * fx[k] for k in range(1, t + 1))
        out.append(float(total))
    return out


def brute_bollinger(xs, w, m):
    out = []
    for t in range(len(xs)):
        if t < w - 1:
            out.append(None)
            continue
        win = xs[t - w + 1 : t + 1]
        mid = statistics.fmean(win)
        sd = statistics.pstdev(win)
        out.append((mid, mid + m * sd, mid - m * sd))
    return out


def close(a, b, rel=1e-9, abs_=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)


def test_sma_examples():
    assert sma([7.0, 7.0, 7.0], 2) == [None, 7.0, 7.0]
    assert sma([1, 2, 3, 4], 2) == [None, 1.5, 2.5, 3.5]
    xs = [3.0, 1.5, 8.25]
    assert sma(xs, 1) == xs


def test_sma_rejects_zero_window():
    with pytest.raises(ValueError):
        sma([1.0], 0)


def test_ema_examples():
    assert ema([5.0] * 6, 4) == [5.0] * 6
    got = ema([1, 2, 3], 2)
    assert got[0] == 1 and close(got[1], 5 / 3, 1e-15) and close(got[2], 23 / 9, 1e-15)


def test_ema_errors():
    with pytest.raises(ValueError):
        ema([1.0], 0)
    with pytest.raises(ValueError):
        ema([], 3)


def test_ema_large_window_step_shrinks():
    # constant-increment series: |EMA_t - EMA_{t-1}| grows toward the increment but
    # each step stays below it, and a larger window moves strictly less
    xs = [100.0 + k for k in range(50)]
    slow = ema(xs, 10_000)
    fast = ema(xs, 10)
    for t in range(1, 50):
        assert abs(slow[t] - slow[t - 1]) < abs(fast[t] - fast[t - 1]) <= 1.0
    assert abs(slow[-1] - xs[0]) < 0.5


def test_macd_examples():
    assert all(p.macd == p.signal == p.histogram == 0 for p in macd([42.0] * 40))
    pts = macd([1, 2, 3], fast=1, slow=2, signal=1)
    assert [p.macd for p in pts] == pytest.approx([0, 1 / 3, 4 / 9], abs=1e-15)
    assert all(p.signal == p.macd and p.histogram == 0 for p in pts)


def test_macd_positive_on_increasing_series():
    xs = [10.0 + 0.5 * k for k in range(60)]
    pts = macd(xs)
    fast, slow = brute_ema(xs, 12), brute_ema(xs, 26)
    for t in range(1, 60):
        assert fast[t] - slow[t] > 0
        assert pts[t].macd > 0


def test_macd_errors():
    with pytest.raises(ValueError):
        macd([1.0, 2.0], fast=26, slow=12)
    with pytest.raises(ValueError):
        macd([1.0, 2.0], signal=0)


def test_bollinger_examples():
    for p in bollinger([9.5] * 25, 20, 2)[19:]:
        assert p.upper == p.middle == p.lower == 9.5
    p = bollinger([1, 3], 2, 2)[1]
    assert (p.middle, p.upper, p.lower) == (2.0, 4.0, 0.0)
    with pytest.raises(ValueError):
        bollinger([1, 3], 2, 0)
    with pytest.raises(ValueError):
        bollinger([1, 3], 1, 2)


@settings(max_examples=150, deadline=None)
@given(prices, st.integers(1, 30))
def test_sma_matches_brute_force(xs, w):
    got, want = sma(xs, w), brute_sma(xs, w)
    assert len(got) == len(xs)
    for g, e in zip(got, want):
        assert (g is None) == (e is None)
        if e is not None:
            assert close(g, e, 1e-12, 0)


@settings(max_examples=100, deadline=None)
@given(prices, st.integers(2, 30), st.floats(0.1, 4))
def test_bollinger_matches_brute_force(xs, w, m):
    for g, e in zip(bollinger(xs, w, m), brute_bollinger(xs, w, m)):
        assert (g is None) == (e is None)
        if e is None:
            continue
        assert g.lower <= g.middle <= g.upper
        assert close(g.middle, e[0], 1e-12, 1e-9)
        assert close(g.upper - g.middle, e[1] - e[0], 1e-9, 1e-6)
        assert g.upper - g.middle == pytest.approx(g.middle - g.lower, rel=1e-12, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1, 1000), min_size=1, max_size=60), st.integers(1, 30))
def test_ema_matches_closed_form(xs, w):
    for g, e in zip(ema(xs, w), brute_ema(xs, w)):
        assert close(g, e, 1e-9, 1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1, 1000), min_size=1, max_size=60))
def test_macd_histogram_identity(xs):
    for p in macd(xs):
        assert p.histogram == p.macd - p.signal


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1, 1000), min_size=30, max_size=60), st.lists(st.floats(1, 1000), min_size=1, max_size=20))
def test_window_indicators_are_shift_equivariant(xs, prefix):
    k = len(prefix)
    for w in (2, 5, 20):
        assert sma(prefix + xs, w)[k + w - 1 :] == pytest.approx(sma(xs, w)[w - 1 :], rel=1e-12)
        a = [(p.middle, p.upper) for p in bollinger(prefix + xs, w)[k + w - 1 :]]
        b = [(p.middle, p.upper) for p in bollinger(xs, w)[w - 1 :]]
        assert np.allclose(a, b, rtol=1e-9, atol=1e-9)


def test_ema_macd_forget_prefix_after_burn_in():
    rng = np.random.default_rng(7)
    xs = (100 * np.exp(np.cumsum(rng.normal(0, 0.02, 600)))).tolist()
    prefix = (50 * np.exp(np.cumsum(rng.normal(0, 0.02, 40)))).tolist()
    burn = 400
    a = [p.macd for p in macd(prefix + xs)][len(prefix) + burn :]
    b = [p.macd for p in macd(xs)][burn:]
    scale = max(abs(v) for v in b)
    assert max(abs(x - y) for x, y in zip(a, b)) <= 1e-9 * max(xs)
    assert scale > 0
    ea = ema(prefix + xs, 26)[len(prefix) + burn :]
    eb = ema(xs, 26)[burn:]
    assert all(close(x, y, 1e-9, 0) for x, y in zip(ea, eb))
