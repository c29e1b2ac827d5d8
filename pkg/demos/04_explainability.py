"""Does "buy low, sell high" on the price-to-utility ratio show up in the
data?  Two checks: clustering of (buy, sell) ratio pairs, and a one-split
decision tree predicting bull-market investments from the buy-date ratio."""

from importlib import resources

from tokenval import (
    build_points,
    build_proxy_panel,
    bull_samples,
    check_criteria,
    fit_tree,
    kmeans,
    load_market_csv,
    render_tree,
    returns,
)

path = resources.files("tokenval").joinpath("data/sample_market.csv")
ds = load_market_csv(str(path))
panel = build_proxy_panel(ds)

# --- Clustering: every 90-day investment becomes a point (PU at buy,
# PU at sell), labeled by k-means into four clusters.
horizon = 90
rp = returns(ds, horizons=(horizon,))
points = build_points(panel["pu_ratio"], rp, horizon, dates=ds.dates)
report = kmeans(points, k=4, seed=0, restarts=10)
report.criteria = check_criteria(report, points)

print(f"{len(points)} investment points, k={report.k}, wcss={report.wcss:.4g}")
for i, (c, size, roi) in enumerate(zip(report.centroids, report.sizes, report.mean_roi)):
    marker = "  <- widest buy/sell gap" if i == report.criteria.winning_cluster_id else ""
    print(f"cluster {i}: buy {c[0]:9.2f}  sell {c[1]:9.2f}  n={size:4d}  mean ROI {roi:7.2%}{marker}")
print("criterion 1 (a cluster buys low, sells high):", report.criteria.exists_buy_low_sell_high)
print("criterion 2 (that cluster has the top ROI):  ", report.criteria.best_cluster_has_max_roi)

# --- Decision tree: label each 180-day investment bull when ROI > 20%,
# train on the earlier 75% of days, purge the overlap after the boundary.
horizon = 180
rp = returns(ds, horizons=(horizon,))
values, labels = bull_samples(panel["pu_ratio"], rp, horizon, bull_threshold=0.20)
tree = fit_tree(values, labels, criterion="entropy", max_depth=1,
                train_fraction=0.75, purge=horizon - 1)

print(f"\ntree on {tree.n_train} training samples ({int(labels[:tree.n_train].sum())} bull)")
print(render_tree(tree.root, "entropy"))
print(f"test accuracy {tree.test_accuracy:.2%}, "
      f"bull precision {tree.test_precision_bull:.2%}, recall {tree.test_recall_bull:.2%}")
