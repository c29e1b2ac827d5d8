"""Per-day fundamental proxies, valuation ratios, and multi-horizon returns.

Every function returns a float64 series aligned to the dataset's daily index.
Undefined points (incomplete lookback windows, zero denominators) are NaN,
never zero or a sentinel; downstream consumers skip them explicitly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ingest import MarketDataset

__all__ = [
    "HorizonExceedsData",
    "ProxyPanel",
    "ReturnPanel",
    "velocity",
    "staking_ratio",
    "dilution_rate",
    "volatility",
    "token_utility",
    "pu_ratio",
    "pe_ratio",
    "nvt_ratio",
    "pm_ratio",
    "adoption_ratios",
    "past100",
    "returns",
    "build_proxy_panel",
    "DEFAULT_HORIZONS",
    "PAST100_LOOKBACK_DAYS",
    "DILUTION_WINDOW_DAYS",
    "VOLATILITY_WINDOWS",
]

DILUTION_WINDOW_DAYS = 90
VOLATILITY_WINDOWS = (30, 60, 90, 180)
# "Past 100 weeks" on the daily index: 700 calendar days.
PAST100_LOOKBACK_DAYS = 700
DEFAULT_HORIZONS = (1, 7, 30, 90, 180, 360)


class HorizonExceedsData(Exception):
    pass


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Elementwise num/den with zero or non-finite denominators mapped to NaN."""
    out = np.full(np.broadcast(num, den).shape, np.nan)
    ok = np.isfinite(den) & (den != 0) & np.isfinite(num)
    np.divide(num, den, out=out, where=ok)
    return out


def velocity(ds: MarketDataset) -> np.ndarray:
    """Share of the monetary base transacted in 24h: volume_usd / market_cap_usd.

    Computed in USD terms so on-chain and off-chain volumes combine; under a
    single daily price this equals tokens-transacted over supply.
    """
    return ds.volume_usd / ds.market_cap_usd


def staking_ratio(ds: MarketDataset) -> np.ndarray:
    """Fraction of supply unmoved for over a year: 1 - supply_active_1y / supply."""
    return 1.0 - ds.supply_active_1y / ds.supply


def dilution_rate(ds: MarketDataset) -> np.ndarray:
    """Annualized supply growth: 365 * mean(issuance over trailing 90d) / supply.

    NaN for the first 89 days where the trailing window is incomplete.
    """
    n = len(ds)
    out = np.full(n, np.nan)
    w = DILUTION_WINDOW_DAYS
    if n >= w:
        means = sliding_window_view(ds.issuance, w).mean(axis=1)
        out[w - 1 :] = 365.0 * means / ds.supply[w - 1 :]
    return out


def volatility(ds: MarketDataset, window: int) -> np.ndarray:
    """Sample std (divisor window-1) of daily log returns over the trailing window.

    First defined index is ``window``: the window of log returns ending at t
    needs window+1 price observations.
    """
    if window < 2:
        raise ValueError("volatility window must be >= 2")
    n = len(ds)
    out = np.full(n, np.nan)
    if n <= window:
        return out
    log_ret = np.diff(np.log(ds.price_usd))
    out[window:] = sliding_window_view(log_ret, window).std(axis=1, ddof=1)
    return out


def token_utility(
    velocity: np.ndarray,
    staking_ratio: np.ndarray,
    dilution_rate: np.ndarray,
    volatility: np.ndarray | None = None,
    mute_volatility: bool = True,
) -> np.ndarray:
    """Composite utility: velocity * staking_ratio / (vol_term * dilution_rate).

    The volatility term defaults to mute (vol_term = 1); passing a volatility
    series with ``mute_volatility=False`` enables the unit-of-account penalty
    for the robustness variant.
    """
    if mute_volatility:
        vol_term = np.ones_like(dilution_rate)
    else:
        if volatility is None:
            raise ValueError("volatility series required when not muted")
        vol_term = volatility
    with np.errstate(divide="ignore", invalid="ignore"):
        tu = velocity * staking_ratio / (vol_term * dilution_rate)
    tu = np.where(np.isfinite(tu), tu, np.nan)
    return tu


def pu_ratio(ds: MarketDataset, tu: np.ndarray) -> np.ndarray:
    """Price over token utility; NaN wherever utility is undefined or <= 0."""
    return _safe_div(ds.price_usd, np.where(tu > 0, tu, np.nan))


def pe_ratio(ds: MarketDataset) -> np.ndarray:
    """Market cap over same-day miner revenue (fees + block rewards), unsmoothed."""
    return _safe_div(ds.market_cap_usd, ds.fees_usd + ds.block_rewards_usd)


def nvt_ratio(ds: MarketDataset) -> np.ndarray:
    """Market cap over 24h transacted value."""
    return _safe_div(ds.market_cap_usd, ds.volume_usd)


def pm_ratio(ds: MarketDataset) -> np.ndarray:
    """Market cap over squared active-address count (network-law fundamental)."""
    return _safe_div(ds.market_cap_usd, ds.active_addresses**2)


def adoption_ratios(ds: MarketDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(amr, tmr, pmr): active addresses, tx count, transfer count per USD market cap."""
    return (
        ds.active_addresses / ds.market_cap_usd,
        ds.tx_count / ds.market_cap_usd,
        ds.transfer_count / ds.market_cap_usd,
    )


def past100(ds: MarketDataset) -> np.ndarray:
    """Negative cumulative return over the past 700 days; NaN in the lead-in."""
    n = len(ds)
    out = np.full(n, np.nan)
    lb = PAST100_LOOKBACK_DAYS
    if n > lb:
        out[lb:] = -(ds.price_usd[lb:] / ds.price_usd[:-lb] - 1.0)
    return out


@dataclass(frozen=True)
class ReturnPanel:
    """Forward simple returns by horizon: roi_h(t) = price(t+h)/price(t) - 1.

    Each series carries a trailing NaN region of length h.
    """

    n_days: int
    roi: dict[int, np.ndarray]

    @property
    def horizons(self) -> tuple[int, ...]:
        return tuple(sorted(self.roi))

    def series(self, horizon: int) -> np.ndarray:
        try:
            return self.roi[horizon]
        except KeyError:
            raise KeyError(
                f"horizon {horizon}d not in panel (has {sorted(self.roi)})"
            ) from None

    def to_csv(self, dates) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        hs = self.horizons
        writer.writerow(["date"] + [f"roi_{h}d" for h in hs])
        for i, day in enumerate(dates):
            writer.writerow([day.isoformat()] + [_cell(self.roi[h][i]) for h in hs])
        return buf.getvalue()


def returns(ds: MarketDataset, horizons=DEFAULT_HORIZONS) -> ReturnPanel:
    """Forward returns for each requested horizon (in days)."""
    n = len(ds)
    out: dict[int, np.ndarray] = {}
    for h in horizons:
        h = int(h)
        if h <= 0:
            raise ValueError("horizon must be positive")
        if h >= n:
            raise HorizonExceedsData(f"horizon {h}d needs more than {n} rows")
        roi = np.full(n, np.nan)
        roi[: n - h] = ds.price_usd[h:] / ds.price_usd[: n - h] - 1.0
        out[h] = roi
    return ReturnPanel(n_days=n, roi=out)


# Column order of the exported proxy panel; fpc is appended by the stats
# layer once the first principal component is computed.
PROXY_COLUMNS = (
    "velocity",
    "staking_ratio",
    "dilution_rate",
    "volatility_30",
    "volatility_60",
    "volatility_90",
    "volatility_180",
    "token_utility",
    "pu_ratio",
    "pe_ratio",
    "nvt_ratio",
    "pm_ratio",
    "upr",
    "epr",
    "tvn",
    "mpr",
    "amr",
    "tmr",
    "pmr",
    "past100",
    "fpc",
)

# The eight fundamental-to-market proxies feeding the first principal component.
FPC_INPUTS = ("past100", "amr", "tmr", "pmr", "epr", "tvn", "mpr", "upr")


@dataclass(frozen=True)
class ProxyPanel:
    """All per-day proxies and ratios for one dataset, NaN in undefined regions."""

    n_days: int
    mute_volatility: bool
    volatility_window: int
    series: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        for name, arr in self.series.items():
            if len(arr) != self.n_days:
                raise ValueError(f"series {name!r} length mismatch")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.series[name]

    def with_fpc(self, scores: np.ndarray) -> "ProxyPanel":
        new = dict(self.series)
        new["fpc"] = scores
        return replace(self, series=new)

    def to_csv(self, dates) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = [c for c in PROXY_COLUMNS if c in self.series]
        writer.writerow(["date"] + cols)
        for i, day in enumerate(dates):
            writer.writerow([day.isoformat()] + [_cell(self.series[c][i]) for c in cols])
        return buf.getvalue()


def _cell(v: float) -> str:
    return "" if not np.isfinite(v) else repr(float(v))


def build_proxy_panel(
    ds: MarketDataset,
    mute_volatility: bool = True,
    volatility_window: int = 180,
) -> ProxyPanel:
    """Compute the full proxy panel for a dataset.

    The market-to-fundamental ratios (pu, pe, nvt, pm) and their inverses
    (upr, epr, tvn, mpr) are both computed from first principles, so each
    inverse stays defined where its own numerator/denominator allow.
    """
    vel = velocity(ds)
    stk = staking_ratio(ds)
    dil = dilution_rate(ds)
    vols = {w: volatility(ds, w) for w in VOLATILITY_WINDOWS}
    tu = token_utility(
        vel, stk, dil,
        volatility=vols.get(volatility_window),
        mute_volatility=mute_volatility,
    )
    amr, tmr, pmr = adoption_ratios(ds)

    miner_rev = ds.fees_usd + ds.block_rewards_usd
    series = {
        "velocity": vel,
        "staking_ratio": stk,
        "dilution_rate": dil,
        "token_utility": tu,
        "pu_ratio": pu_ratio(ds, tu),
        "pe_ratio": pe_ratio(ds),
        "nvt_ratio": nvt_ratio(ds),
        "pm_ratio": pm_ratio(ds),
        "upr": _safe_div(tu, ds.price_usd),
        "epr": miner_rev / ds.market_cap_usd,
        "tvn": ds.volume_usd / ds.market_cap_usd,
        "mpr": ds.active_addresses**2 / ds.market_cap_usd,
        "amr": amr,
        "tmr": tmr,
        "pmr": pmr,
        "past100": past100(ds),
    }
    for w, arr in vols.items():
        series[f"volatility_{w}"] = arr
    return ProxyPanel(
        n_days=len(ds),
        mute_volatility=mute_volatility,
        volatility_window=volatility_window,
        series=series,
    )
