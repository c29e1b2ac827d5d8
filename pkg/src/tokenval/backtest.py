"""Signal generation and a deterministic single-asset trading simulator.

Three signal rules are provided: expanding-quantile thresholds on a
valuation ratio, a short/long moving-average crossover, and plain
buy-and-hold.  The engine itself is strategy-agnostic: it walks the daily
signal series once, executes at the close with a proportional fee and an
optional per-trade size cap, and keeps an exact cash/holdings ledger (no
leverage, no shorting).
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
from bisect import bisect_left, insort
from collections import deque
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ingest import MarketDataset

__all__ = [
    "BacktestError",
    "WindowOrder",
    "SignalDateMismatch",
    "BUY",
    "SELL",
    "HOLD",
    "Trade",
    "BacktestReport",
    "signal_pu_quantile",
    "signal_ma_cross",
    "signal_buy_hold",
    "run",
]

BUY, HOLD, SELL = 1, 0, -1

# Trades below this token amount are treated as exhausted capacity, so a
# run of same-side signals stops once cash or holdings are effectively zero.
MIN_TRADE_TOKENS = 1e-12


class BacktestError(Exception):
    pass


class WindowOrder(BacktestError):
    pass


class SignalDateMismatch(BacktestError):
    pass


def _interp_quantile(sorted_values: list[float], q: float) -> float:
    """Inclusive linear-interpolation quantile of an ascending list."""
    m = len(sorted_values)
    pos = (m - 1) * q
    lo = int(math.floor(pos))
    hi = int(math.ceil(pos))
    if lo == hi:
        return sorted_values[lo]
    frac = pos - lo
    return sorted_values[lo] * (1.0 - frac) + sorted_values[hi] * frac


def signal_pu_quantile(
    ratio: np.ndarray,
    low_q: float = 0.1,
    high_q: float = 0.9,
    warmup: int = 30,
    window: int | None = None,
) -> np.ndarray:
    """Buy when the ratio is at or below its historical low quantile, sell at
    or above the high quantile.

    Quantiles are taken over every defined observation up to and including
    the current day (expanding window; pass ``window`` for a fixed trailing
    count instead).  No signal fires until ``warmup`` defined observations
    have accumulated, and a day satisfying both thresholds (a constant
    series) resolves to hold.
    """
    if not 0.0 < low_q < high_q < 1.0:
        raise ValueError("quantiles must satisfy 0 < low_q < high_q < 1")
    n = len(ratio)
    signals = np.zeros(n, dtype=np.int8)
    sorted_hist: list[float] = []
    arrival: deque[float] = deque()
    for t in range(n):
        v = ratio[t]
        if not np.isfinite(v):
            continue
        v = float(v)
        insort(sorted_hist, v)
        arrival.append(v)
        if window is not None and len(arrival) > window:
            oldest = arrival.popleft()
            del sorted_hist[bisect_left(sorted_hist, oldest)]
        if len(sorted_hist) < warmup:
            continue
        lo = _interp_quantile(sorted_hist, low_q)
        hi = _interp_quantile(sorted_hist, high_q)
        is_buy = v <= lo
        is_sell = v >= hi
        if is_buy and not is_sell:
            signals[t] = BUY
        elif is_sell and not is_buy:
            signals[t] = SELL
    return signals


def _sma(x: np.ndarray, window: int) -> np.ndarray:
    # Sum first, divide once: a constant window then yields the constant
    # exactly, so flat prices never produce a phantom crossing.
    out = np.full(len(x), np.nan)
    if len(x) >= window:
        sums = sliding_window_view(x, window).sum(axis=1)
        out[window - 1 :] = sums / window
    return out


def signal_ma_cross(price: np.ndarray, short_w: int = 20, long_w: int = 100) -> np.ndarray:
    """Buy when the short moving average moves above the long one, sell when
    it moves back to or below it.

    The comparison state starts at "short <= long", so a short average that
    is already above the long one on the first fully-defined day counts as a
    crossing and emits the initial buy.
    """
    if short_w >= long_w:
        raise WindowOrder(f"short window {short_w} must be below long window {long_w}")
    if short_w < 1:
        raise ValueError("short window must be >= 1")
    short = _sma(price, short_w)
    long = _sma(price, long_w)
    n = len(price)
    signals = np.zeros(n, dtype=np.int8)
    above = False
    for t in range(n):
        if not (np.isfinite(short[t]) and np.isfinite(long[t])):
            continue
        now_above = short[t] > long[t]
        if now_above and not above:
            signals[t] = BUY
        elif not now_above and above:
            signals[t] = SELL
        above = now_above
    return signals


def signal_buy_hold(n_days: int) -> np.ndarray:
    """Single buy on the first day, hold forever after."""
    signals = np.zeros(n_days, dtype=np.int8)
    if n_days > 0:
        signals[0] = BUY
    return signals


@dataclass(frozen=True)
class Trade:
    date: dt.date
    side: str  # "buy" | "sell"
    tokens: float
    price: float
    fee_usd: float
    signal_value: float


@dataclass(frozen=True)
class BacktestReport:
    """Ledger-backed result of one strategy run.

    ``gross_roi`` marks holdings to market at the final close;
    ``gross_roi_liquidated`` additionally charges the fee a closing sale
    would pay.  ``sharpe_annualized`` is mean/sd of daily equity returns
    scaled by sqrt(365) (zero risk-free rate) and NaN for a flat curve.
    """

    strategy: str
    params: dict
    trades: tuple[Trade, ...]
    cash: np.ndarray
    holdings: np.ndarray
    equity: np.ndarray
    gross_roi: float
    gross_roi_liquidated: float
    sharpe_annualized: float
    sharpe_defined: bool
    max_drawdown: float
    fees_paid_usd: float

    def trades_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["date", "side", "tokens", "price", "fee_usd", "signal_value"])
        for tr in self.trades:
            writer.writerow(
                [
                    tr.date.isoformat(),
                    tr.side,
                    repr(tr.tokens),
                    repr(tr.price),
                    repr(tr.fee_usd),
                    "" if math.isnan(tr.signal_value) else repr(tr.signal_value),
                ]
            )
        return buf.getvalue()

    def equity_csv(self, dates) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["date", "cash", "holdings", "equity"])
        for i, day in enumerate(dates):
            writer.writerow(
                [day.isoformat(), repr(float(self.cash[i])),
                 repr(float(self.holdings[i])), repr(float(self.equity[i]))]
            )
        return buf.getvalue()

    def summary_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "params": self.params,
            "n_trades": len(self.trades),
            "gross_roi": self.gross_roi,
            "gross_roi_liquidated": self.gross_roi_liquidated,
            "sharpe_annualized": None if not self.sharpe_defined else self.sharpe_annualized,
            "max_drawdown": self.max_drawdown,
            "fees_paid_usd": self.fees_paid_usd,
            "final_equity": float(self.equity[-1]) if len(self.equity) else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary_dict(), indent=2, sort_keys=True)


def run(
    ds: MarketDataset,
    signals: np.ndarray,
    capital: float = 100_000.0,
    fee_rate: float = 0.001,
    cap_tokens: float | None = 100.0,
    signal_values: np.ndarray | None = None,
    strategy: str = "",
    params: dict | None = None,
    first_signal_only: bool = False,
) -> BacktestReport:
    """Replay a signal series against the dataset's close prices.

    A buy converts as much cash as the cap allows into tokens, paying
    ``fee_rate`` on the notional on top of it; a sell converts tokens back,
    paying the fee out of the proceeds.  Consecutive same-side signals keep
    executing while capacity remains, then become no-ops; with
    ``first_signal_only`` a side executes once and further signals on that
    side are ignored until the opposite side trades.  Equity is marked at
    every close; gross ROI is measured against the starting capital.
    """
    n = len(ds)
    if len(signals) != n:
        raise SignalDateMismatch(f"{len(signals)} signals for {n} dataset days")
    if capital <= 0:
        raise ValueError("capital must be positive")
    if fee_rate < 0:
        raise ValueError("fee_rate must be non-negative")
    if cap_tokens is not None and cap_tokens <= 0:
        raise ValueError("cap_tokens must be positive when set")

    price = ds.price_usd
    dates = ds.dates
    cash = float(capital)
    holdings = 0.0
    fees_total = 0.0
    last_side: str | None = None
    trades: list[Trade] = []
    cash_series = np.empty(n)
    hold_series = np.empty(n)
    equity = np.empty(n)

    for t in range(n):
        sig = int(signals[t])
        p = float(price[t])
        sig_val = float("nan") if signal_values is None else float(signal_values[t])
        if sig == BUY and not (first_signal_only and last_side == "buy"):
            affordable = cash / (p * (1.0 + fee_rate))
            tokens = affordable if cap_tokens is None else min(cap_tokens, affordable)
            if tokens > MIN_TRADE_TOKENS:
                notional = tokens * p
                fee = fee_rate * notional
                cash -= notional + fee
                holdings += tokens
                fees_total += fee
                last_side = "buy"
                trades.append(Trade(dates[t], "buy", tokens, p, fee, sig_val))
        elif sig == SELL and not (first_signal_only and last_side == "sell"):
            tokens = holdings if cap_tokens is None else min(cap_tokens, holdings)
            if tokens > MIN_TRADE_TOKENS:
                notional = tokens * p
                fee = fee_rate * notional
                cash += notional - fee
                holdings -= tokens
                fees_total += fee
                last_side = "sell"
                trades.append(Trade(dates[t], "sell", tokens, p, fee, sig_val))
        cash_series[t] = cash
        hold_series[t] = holdings
        equity[t] = cash + holdings * p

    gross_roi = float(equity[-1] / capital - 1.0)
    final_price = float(price[-1])
    liquidated = cash + holdings * final_price * (1.0 - fee_rate)
    gross_roi_liq = float(liquidated / capital - 1.0)

    daily_ret = equity[1:] / equity[:-1] - 1.0 if n > 1 else np.array([])
    sd = float(daily_ret.std(ddof=1)) if len(daily_ret) > 1 else 0.0
    sharpe_defined = sd > 0.0
    sharpe = float(daily_ret.mean() / sd * math.sqrt(365.0)) if sharpe_defined else float("nan")

    running_max = np.maximum.accumulate(equity)
    max_dd = float(np.max(1.0 - equity / running_max)) if n else 0.0

    for arr in (cash_series, hold_series, equity):
        arr.setflags(write=False)
    return BacktestReport(
        strategy=strategy,
        params=dict(params or {}),
        trades=tuple(trades),
        cash=cash_series,
        holdings=hold_series,
        equity=equity,
        gross_roi=gross_roi,
        gross_roi_liquidated=gross_roi_liq,
        sharpe_annualized=sharpe,
        sharpe_defined=sharpe_defined,
        max_drawdown=max_dd,
        fees_paid_usd=fees_total,
    )
