import datetime as dt

import numpy as np
import pytest

from tokenval.ingest import MARKET_FIELDS, MarketDataset


def make_dataset(
    n: int = 120,
    start: dt.date = dt.date(2020, 1, 1),
    price=None,
    seed: int = 7,
    **overrides,
) -> MarketDataset:
    """Small consistent synthetic dataset for unit tests."""
    rng = np.random.default_rng(seed)
    if price is None:
        price = 100.0 * np.exp(np.cumsum(rng.standard_normal(n) * 0.02))
    price = np.asarray(price, dtype=np.float64)
    n = len(price)
    issuance = np.full(n, 900.0)
    supply = 1_000_000.0 + np.cumsum(issuance)
    cols = {
        "price_usd": price,
        "market_cap_usd": price * supply,
        "supply": supply,
        "issuance": issuance,
        "fees_usd": np.full(n, 5_000.0),
        "block_rewards_usd": 900.0 * price,
        "volume_usd": price * supply * 0.02,
        "active_addresses": np.full(n, 50_000.0),
        "tx_count": np.full(n, 90_000.0),
        "transfer_count": np.full(n, 200_000.0),
        "supply_active_1y": supply * 0.4,
    }
    cols.update({k: np.asarray(v, dtype=np.float64) for k, v in overrides.items()})
    return MarketDataset(start=start, **cols)


@pytest.fixture
def small_ds():
    return make_dataset(n=120)


def csv_from_rows(header, rows):
    return "\n".join([",".join(header)] + [",".join(str(c) for c in r) for r in rows]) + "\n"


assert set(MARKET_FIELDS) == {
    "price_usd", "market_cap_usd", "supply", "issuance", "fees_usd",
    "block_rewards_usd", "volume_usd", "active_addresses", "tx_count",
    "transfer_count", "supply_active_1y",
}
