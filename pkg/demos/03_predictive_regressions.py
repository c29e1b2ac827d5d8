"""Predictive power of the fundamental-to-market proxies on forward returns.

Each cell regresses the h-day forward return on the proxy observed at the
buy date, with Bartlett long-run-variance t-statistics at h-1 lags (the
overlap of consecutive h-day returns).  Stars mark 10/5/1% two-sided
significance under normal critical values.
"""

from importlib import resources

from tokenval import attach_fpc, build_proxy_panel, load_market_csv, predictive_table, returns

path = resources.files("tokenval").joinpath("data/sample_market.csv")
ds = load_market_csv(str(path))

panel, pca = attach_fpc(build_proxy_panel(ds))
print("fpc loadings:", {c: round(float(l), 3) for c, l in zip(pca.columns, pca.loadings)})
print(f"fpc explains {pca.explained_variance_fraction:.1%} of proxy variance\n")

horizons = (7, 30, 90, 180, 360)
rows = predictive_table(panel, returns(ds, horizons=horizons), horizons=horizons)

by_cell = {(r.proxy_name, r.horizon_days): r for r in rows}
print(f"{'proxy':>8} " + " ".join(f"{h:>14}d" for h in horizons))
for proxy in ("past100", "amr", "tmr", "pmr", "epr", "tvn", "mpr", "upr", "fpc"):
    cells = []
    for h in horizons:
        r = by_cell[(proxy, h)]
        cells.append(f"{r.beta:10.3g}{r.stars:<3} ")
    print(f"{proxy:>8} " + " ".join(cells))
    print(f"{'':>8} " + " ".join(f"({by_cell[(proxy, h)].t_stat:8.2f})     " for h in horizons))
    print(f"{'R2':>8} " + " ".join(f"{by_cell[(proxy, h)].r_squared:10.3f}    " for h in horizons))
