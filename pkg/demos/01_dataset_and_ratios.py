"""Walk through ingestion and the daily ratio panel on the bundled sample.

The sample dataset is synthetic but respects every invariant of a real
export: contiguous daily dates, positive prices, non-decreasing supply, and
a 1-year-active supply that never exceeds total supply.
"""

from importlib import resources

import numpy as np

from tokenval import build_proxy_panel, load_market_csv

path = resources.files("tokenval").joinpath("data/sample_market.csv")
ds = load_market_csv(str(path))
print(f"dataset: {ds.start} .. {ds.end}  ({len(ds)} days, flags={list(ds.flags)})")

panel = build_proxy_panel(ds)

# The three fundamental proxies behind token utility, then the ratio family.
# Each series is NaN until its lookback window fills (89 days for dilution,
# the window length for volatility, 700 days for the past-return proxy).
for name in (
    "velocity", "staking_ratio", "dilution_rate", "token_utility",
    "pu_ratio", "pe_ratio", "nvt_ratio", "pm_ratio",
):
    s = panel[name]
    defined = np.isfinite(s)
    first = int(np.flatnonzero(defined)[0])
    print(
        f"{name:>14}: first defined day {first:4d}, "
        f"median {np.nanmedian(s):12.6g}, last {s[-1]:12.6g}"
    )

# Inverse-ratio sanity: each market-to-fundamental ratio times its inverse
# is 1 wherever both are defined.
prod = panel["pu_ratio"] * panel["upr"]
ok = np.isfinite(prod)
print(f"\nmax |pu_ratio * upr - 1| over {ok.sum()} days: {np.max(np.abs(prod[ok] - 1)):.2e}")
