"""Summary statistics of multi-horizon returns, in the style of a returns
table: moments, long-run-variance t-stats, and the extreme-event panel."""

from importlib import resources

from tokenval import load_market_csv, returns, summarize_returns

path = resources.files("tokenval").joinpath("data/sample_market.csv")
ds = load_market_csv(str(path))

rp = returns(ds, horizons=(1, 7, 30, 90, 180, 360))
summary = summarize_returns(rp)

print(f"{'horizon':>8} {'mean':>9} {'sd':>9} {'t':>7} {'sharpe':>7} "
      f"{'skew':>7} {'kurt':>7} {'%>0':>6}")
for h in summary.horizons:
    print(
        f"{h.horizon_days:>7}d {h.mean:9.4f} {h.sd:9.4f} {h.t_stat:7.2f} "
        f"{h.sharpe:7.3f} {h.skewness:7.2f} {h.kurtosis:7.2f} {h.pct_positive:6.2f}"
    )

# Daily tail behavior: the counts shrink as the threshold grows, and the
# up-tail is usually fatter than the down-tail for assets with drift.
print("\ndaily extreme events")
print(f"{'threshold':>10} {'disasters':>10} {'%':>6} {'miracles':>9} {'%':>6}")
for e in summary.extremes:
    print(
        f"{e.threshold:10.0%} {e.disaster_count:10d} {e.disaster_pct:6.2f} "
        f"{e.miracle_count:9d} {e.miracle_pct:6.2f}"
    )
