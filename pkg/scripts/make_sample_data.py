"""Regenerate the bundled synthetic sample dataset.

The sample is a deterministic fake daily market history (seed pinned below)
with the same column schema and invariants as a real export, long enough
for every lookback in the package: 700 days for the past-return proxy plus
a 360-day forward-return horizon with room to spare.  Run from the repo
root:

    python3 scripts/make_sample_data.py
"""

import datetime as dt
import pathlib

import numpy as np

N_DAYS = 1_700
START = dt.date(2016, 1, 1)
SEED = 20160101

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "tokenval" / "data" / "sample_market.csv"


def synthesize(n_days: int = N_DAYS, start: dt.date = START, seed: int = SEED):
    rng = np.random.default_rng(seed)
    t = np.arange(n_days)

    # Price: geometric walk with a slow multi-year cycle so the sample has
    # visible bull and bear phases (the clustering and tree demos need both
    # classes of outcome).
    cycle = 0.9 * np.sin(2 * np.pi * t / 900.0) + 0.35 * np.sin(2 * np.pi * t / 260.0)
    drift = 0.0012
    shocks = rng.standard_normal(n_days) * 0.035
    log_price = np.log(450.0) + np.cumsum(drift + shocks) + cycle
    price = np.exp(log_price)

    # Supply grows by a halving-style issuance schedule.
    issuance = np.where(t < 900, 1800.0, 900.0) * (1.0 + 0.05 * rng.standard_normal(n_days))
    issuance = np.clip(issuance, 0.0, None)
    supply = 15_000_000.0 + np.cumsum(issuance)

    market_cap = price * supply

    # Activity scales with price with idiosyncratic noise.
    active = 250_000.0 * (price / price[0]) ** 0.55 * np.exp(0.25 * rng.standard_normal(n_days))
    active = np.round(np.clip(active, 5_000.0, None))
    tx_count = np.round(active * np.clip(rng.normal(1.4, 0.18, n_days), 0.6, None))
    transfers = np.round(tx_count * np.clip(rng.normal(2.1, 0.25, n_days), 0.8, None))

    # Volume: on-chain plus a noisier off-chain leg, a few percent of cap.
    vol_on = market_cap * np.clip(rng.normal(0.012, 0.004, n_days), 0.0005, None)
    vol_off = market_cap * np.clip(rng.normal(0.020, 0.009, n_days), 0.0, None)

    fees = vol_on * np.clip(rng.normal(0.0012, 0.0004, n_days), 0.00005, None)
    block_rewards = issuance * price

    # Share of supply untouched for a year wanders between 45% and 75%.
    hodl = 0.60 + 0.12 * np.sin(2 * np.pi * t / 700.0 + 1.0) + np.cumsum(rng.standard_normal(n_days)) * 0.0004
    hodl = np.clip(hodl, 0.45, 0.75)
    supply_active_1y = supply * (1.0 - hodl)

    return {
        "date": [start + dt.timedelta(days=int(i)) for i in t],
        "price_usd": price,
        "market_cap_usd": market_cap,
        "supply": supply,
        "issuance": issuance,
        "fees_usd": fees,
        "block_rewards_usd": block_rewards,
        "volume_onchain_usd": vol_on,
        "volume_offchain_usd": vol_off,
        "active_addresses": active,
        "tx_count": tx_count,
        "transfer_count": transfers,
        "supply_active_1y": supply_active_1y,
    }


def main():
    cols = synthesize()
    names = [k for k in cols if k != "date"]
    lines = [",".join(["date"] + names)]
    for i, day in enumerate(cols["date"]):
        lines.append(",".join([day.isoformat()] + [repr(float(cols[k][i])) for k in names]))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {OUT} ({len(lines) - 1} rows)")


if __name__ == "__main__":
    main()
