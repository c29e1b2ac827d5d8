"""Compare the three automated strategies on the bundled sample: ratio
quantile thresholds, moving-average crossover, and buy-and-hold.

All runs share the same cost model: 100,000 starting capital, 0.1%
proportional fee, and at most 100 tokens per trade.
"""

from importlib import resources

from tokenval import (
    build_proxy_panel,
    load_market_csv,
    run_backtest,
    signal_buy_hold,
    signal_ma_cross,
    signal_pu_quantile,
)

path = resources.files("tokenval").joinpath("data/sample_market.csv")
ds = load_market_csv(str(path))
panel = build_proxy_panel(ds)

pu = panel["pu_ratio"]
strategies = {
    # Buy at or below the expanding 10% quantile of the ratio's history,
    # sell at or above the 90% quantile, after a 30-observation warm-up.
    "pu_quantile": signal_pu_quantile(pu, low_q=0.1, high_q=0.9, warmup=30),
    "ma_cross": signal_ma_cross(ds.price_usd, short_w=20, long_w=100),
    "buy_hold": signal_buy_hold(len(ds)),
}

print(f"{'strategy':>12} {'trades':>7} {'gross ROI':>11} {'liq. ROI':>11} "
      f"{'sharpe':>7} {'max DD':>7} {'fees':>12}")
for name, signals in strategies.items():
    rep = run_backtest(
        ds, signals, capital=100_000.0, fee_rate=0.001, cap_tokens=100.0,
        signal_values=pu if name == "pu_quantile" else ds.price_usd,
        strategy=name,
    )
    sharpe = f"{rep.sharpe_annualized:7.2f}" if rep.sharpe_defined else "    n/a"
    print(
        f"{name:>12} {len(rep.trades):>7} {rep.gross_roi:>11.2%} "
        f"{rep.gross_roi_liquidated:>11.2%} {sharpe} {rep.max_drawdown:>7.2%} "
        f"{rep.fees_paid_usd:>12,.2f}"
    )

print("\nbuy-and-hold ROI is marked to market (no forced final sale); the")
print("liquidation-inclusive column charges the closing fee for comparison.")
