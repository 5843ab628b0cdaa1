import math
from datetime import date

import pytest
from hypothesis import given, settings, strategies as st

from coinbench.dataio import DataError
from coinbench.engine import FeeModel, run_backtest
from coinbench.strategies import (
    FilePredictor,
    StrategySpec,
    TuneError,
    bollinger_strategy,
    crossing_signal,
    default_grid,
    forecaster_strategy,
    load_tuned,
    macd_strategy,
    momentum_predictor,
    persistence_predictor,
    save_tuned,
    slma_strategy,
    sma_strategy,
    tune,
)
from coinbench.synthetic import random_walk_dataset
from conftest import full_split, make_dataset


def actions_of(dataset, strategy, skip=0):
    return [r.action for r in run_backtest(dataset, full_split(dataset, skip=skip), strategy).records]


def brute_sma(xs, w):
    return [None if t < w - 1 else math.fsum(xs[t - w + 1 : t + 1]) / w for t in range(len(xs))]


def brute_ema(xs, w):
    a = 2 / (w + 1)
    return [
        math.fsum([(1 - a) ** t * xs[0]] + [a * (1 - a) ** (t - k) * xs[k] for k in range(1, t + 1)])
        for t in range(len(xs))
    ]


def scan_crossings(spread):
    """Forward scan: remember the last nonzero side, emit on every side change."""
    out, side = [], 0
    for v in spread:
        if v is None:
            out.append(0)
            side = 0
            continue
        s = (v > 0) - (v < 0)
        out.append(s if s and side and s != side else 0)
        if s:
            side = s
    return out


def slma_oracle(prices, short, long):
    f, s = brute_sma(prices, short), brute_sma(prices, long)
    return scan_crossings([None if a is None or b is None else a - b for a, b in zip(f, s)])


def macd_oracle(prices, fast=12, slow=26, signal=9):
    line = [a - b for a, b in zip(brute_ema(prices, fast), brute_ema(prices, slow))]
    sig = brute_ema(line, signal)
    return scan_crossings([None if i < slow - 1 else m - g for i, (m, g) in enumerate(zip(line, sig))])


# --- level and crossover strategies -------------------------------------------------------


@pytest.mark.parametrize("window", [5, 10, 15, 20, 30])
def test_sma_direction_examples(window):
    flat = make_dataset([50.0] * 40)
    up = make_dataset([50.0 + k for k in range(40)])
    down = make_dataset([90.0 - k for k in range(40)])
    sma_w = lambda c: sma_strategy(c, window)  # noqa: E731
    assert set(actions_of(flat, sma_w)) == {0.0}
    got_up, got_down = actions_of(up, sma_w), actions_of(down, sma_w)
    # day k sees k + 1 prices; average defined once k + 1 >= window
    assert got_up == [0.0] * (window - 1) + [1.0] * (40 - window)
    assert got_down == [0.0] * (window - 1) + [-1.0] * (40 - window)


def test_crossing_signal_examples():
    assert crossing_signal([None, -1.0, 2.0]) == 1
    assert crossing_signal([1.0, -0.5]) == -1
    assert crossing_signal([-1.0, 0.0, 0.0, 3.0]) == 1
    assert crossing_signal([1.0, 0.0, 3.0]) == 0
    assert crossing_signal([None, 3.0]) == 0
    assert crossing_signal([2.0]) == 0


def test_slma_constant_never_signals():
    ds = make_dataset([10.0] * 60)
    assert set(actions_of(ds, lambda c: slma_strategy(c, 5, 20))) == {0.0}


def test_slma_v_shape_single_golden_cross():
    prices = [200.0 - 3 * k for k in range(40)] + [83.0 + 2 * k for k in range(40)]
    ds = make_dataset(prices)
    got = actions_of(ds, lambda c: slma_strategy(c, 5, 20))
    want = slma_oracle(prices, 5, 20)[:-1]
    assert got == want
    assert got.count(1.0) == 1 and got.count(-1.0) == 0
    assert got.index(1.0) > 39


@pytest.mark.parametrize("short,long", [(5, 10), (10, 30), (15, 20)])
def test_slma_monotone_at_most_one_signal(short, long):
    prices = [100.0 * 1.01**k for k in range(70)]
    got = actions_of(make_dataset(prices), lambda c: slma_strategy(c, short, long))
    assert sum(a != 0 for a in got) <= 1
    assert got == slma_oracle(prices, short, long)[:-1]


def test_slma_rejects_bad_windows():
    ds = make_dataset([1.0] * 5)
    with pytest.raises(Exception):
        run_backtest(ds, full_split(ds), lambda c: slma_strategy(c, 20, 5))
    with pytest.raises(ValueError):
        StrategySpec("slma", {"short": 20, "long": 20})


def test_macd_constant_and_warmup():
    ds = make_dataset([7.0] * 60)
    assert set(actions_of(ds, macd_strategy)) == {0.0}
    wave = [100 + 10 * math.sin(k / 3) for k in range(60)]
    assert actions_of(make_dataset(wave), macd_strategy)[:25] == [0.0] * 25


def test_macd_sine_alternates_like_scanner():
    prices = [100 + 10 * math.sin(2 * math.pi * k / 30) for k in range(150)]
    got = actions_of(make_dataset(prices), macd_strategy)
    assert got == macd_oracle(prices)[:-1]
    signals = [a for a in got if a]
    assert len(signals) >= 6
    assert all(a != b for a, b in zip(signals, signals[1:]))


def test_bollinger_examples():
    flat = make_dataset([30.0] * 30)
    assert set(actions_of(flat, bollinger_strategy)) == {0.0}
    wiggle = [100.0 + (1 if k % 2 else -1) for k in range(30)]
    spike = wiggle[:25] + [80.0] + wiggle[26:]
    got = actions_of(make_dataset(spike), bollinger_strategy)
    assert got[25] == 1.0
    assert set(got[:25]) == {0.0}
    # upward spike is a sell
    assert actions_of(make_dataset(wiggle[:25] + [120.0] + wiggle[26:]), bollinger_strategy)[25] == -1.0


# --- forecaster ---------------------------------------------------------------------------


def test_forecaster_persistence_and_momentum():
    ds = make_dataset([10.0 + k for k in range(12)])
    assert set(actions_of(ds, lambda c: forecaster_strategy(c, persistence_predictor))) == {0.0}
    got = actions_of(ds, lambda c: forecaster_strategy(c, momentum_predictor))
    assert got[0] == 0.0 and set(got[1:]) == {1.0}
    assert momentum_predictor([10.0, 4.0], date(2023, 1, 1)) == 2.0


def test_file_predictor(tmp_path):
    path = tmp_path / "pred.csv"
    path.write_text("date,predicted_next_open\n2023-01-01,12\n2023-01-02,9\n", encoding="utf-8")
    ds = make_dataset([10.0, 10.0, 10.0, 10.0])
    strat = StrategySpec("forecaster", {"predictor": str(path)}).build()
    with pytest.raises(Exception, match="2023-01-03"):
        run_backtest(ds, full_split(ds), strat)
    p = FilePredictor(path)
    assert p([1.0], date(2023, 1, 2)) == 9.0
    with pytest.raises(DataError, match="2023-01-05"):
        p([1.0], date(2023, 1, 5))


def test_forecaster_rejects_bad_prediction():
    ds = make_dataset([10.0, 10.0])
    with pytest.raises(Exception, match="invalid price"):
        run_backtest(ds, full_split(ds), lambda c: forecaster_strategy(c, lambda p, d: float("nan")))


# --- purity and value range ---------------------------------------------------------------

ALL_SPECS = [s for kind in ("buy_and_hold", "sma", "slma", "macd", "bollinger", "forecaster") for s in default_grid(kind)]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_classical_actions_are_pure_full_position_signals(seed):
    ds = random_walk_dataset(seed, n_days=70)
    for spec in ALL_SPECS:
        strat = spec.build()
        seen = []

        def twice(ctx):
            a, b = strat(ctx), strat(ctx)
            assert a == b
            seen.append(a.fraction)
            return a

        run_backtest(ds, full_split(ds), twice)
        assert set(seen) <= {-1.0, 0.0, 1.0}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(5, 10), (5, 30), (10, 20), (20, 30)]))
def test_crossovers_alternate_on_random_walks(seed, windows):
    ds = random_walk_dataset(seed, n_days=120)
    prices = [d.open for d in ds.market]
    got = actions_of(ds, lambda c: slma_strategy(c, *windows))
    assert got == slma_oracle(prices, *windows)[:-1]
    signals = [a for a in got if a]
    assert all(a != b for a, b in zip(signals, signals[1:]))
    got = actions_of(ds, macd_strategy)
    assert got == macd_oracle(prices)[:-1]


# --- specs and tuning ---------------------------------------------------------------------


def test_spec_defaults_and_label():
    s = StrategySpec("macd")
    assert s.params == {"fast": 12, "slow": 26, "signal": 9}
    assert s.label == "macd(fast=12,slow=26,signal=9)"
    assert StrategySpec.from_dict(s.to_dict()) == s
    with pytest.raises(ValueError):
        StrategySpec("sma", {"window": 0})
    with pytest.raises(ValueError):
        StrategySpec("sma", {"span": 3})
    with pytest.raises(ValueError):
        StrategySpec("lstm")


def exhaustive_best(dataset, split, specs, fee):
    """Independent oracle: rerun each spec, score by raw net-worth ratio, same tie-break."""
    scored = []
    for spec in specs:
        r = run_backtest(dataset, split, spec.build(), fee=fee)
        w = r.valuation_sequence()
        rets = [b / a - 1 for a, b in zip(w, w[1:])]
        mean = sum(rets) / len(rets)
        sd = math.sqrt(sum((x - mean) ** 2 for x in rets) / (len(rets) - 1))
        sharpe = mean / sd if sd > 0 else 0.0
        scored.append((-(r.final_net_worth / r.start_net_worth), -sharpe, tuple(spec.params.values()), spec))
    return min(scored, key=lambda t: t[:3])[3]


def zigzag(period, n, p0=100.0, step=0.04):
    out, p = [], p0
    for k in range(n):
        p *= 1 + step if (k // period) % 2 == 0 else 1 - step
        out.append(p)
    return out


def test_tune_single_spec():
    ds = random_walk_dataset(1, n_days=40)
    only = StrategySpec("sma", {"window": 15})
    report = tune(ds, full_split(ds), "sma", grid=[only])
    assert report.chosen == only and len(report.scores) == 1


def test_tune_picks_fast_window_on_regime_switches():
    ds = make_dataset(zigzag(8, 120))
    split = full_split(ds)
    report = tune(ds, split, "sma", fee=FeeModel(0.0))
    assert report.chosen == StrategySpec("sma", {"window": 5})
    assert report.chosen == exhaustive_best(ds, split, report.grid, FeeModel(0.0))


def test_tune_slma_grid_has_ten_pairs():
    ds = random_walk_dataset(2, n_days=60)
    report = tune(ds, full_split(ds), "slma")
    assert len(report.grid) == len(report.scores) == 10
    assert all(s.params["short"] < s.params["long"] for s in report.grid)


def test_tune_ties_go_to_smaller_parameters():
    ds = make_dataset([10.0] * 50)
    grid = list(reversed(default_grid("sma")))
    assert tune(ds, full_split(ds), "sma", grid=grid).chosen.params == {"window": 5}


def test_tune_annotates_failures_and_checks_grid():
    ds = make_dataset([10.0] * 5)
    bad = StrategySpec("forecaster", {"predictor": "/nonexistent/preds.csv"})
    with pytest.raises(TuneError, match="preds.csv"):
        tune(ds, full_split(ds), "forecaster", grid=[bad])
    with pytest.raises(ValueError):
        tune(ds, full_split(ds), "sma", grid=[StrategySpec("macd")])
    with pytest.raises(ValueError):
        tune(ds, full_split(ds), "sma", grid=[])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["sma", "slma", "bollinger"]))
def test_tune_matches_exhaustive_oracle(seed, kind):
    ds = random_walk_dataset(seed, n_days=80)
    split = full_split(ds)
    report = tune(ds, split, kind)
    assert report.chosen == exhaustive_best(ds, split, report.grid, None)


def test_tuned_cache_round_trip(tmp_path):
    path = tmp_path / "tuned.json"
    assert load_tuned(path, "BTC", "sma") is None
    save_tuned(path, "BTC", StrategySpec("sma", {"window": 10}))
    save_tuned(path, "ETH", StrategySpec("slma", {"short": 5, "long": 30}))
    assert load_tuned(path, "BTC", "sma") == StrategySpec("sma", {"window": 10})
    assert load_tuned(path, "ETH", "slma").params == {"short": 5, "long": 30}
    assert load_tuned(path, "ETH", "sma") is None
