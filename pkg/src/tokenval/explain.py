"""Explainability checks for a valuation ratio.

Two independent procedures probe whether "buy low, sell high" on a ratio is
visible in the data:

* K-means over (buy-date ratio, sell-date ratio) pairs, with two consistency
  criteria: some cluster sits below the diagonal (bought cheap, sold dear),
  and the cluster with the widest buy/sell gap also earns the highest mean
  ROI.
* A single-feature decision tree that predicts bull-market investments
  (horizon ROI above a threshold) from the buy-date ratio alone, trained on
  the chronologically earlier part of the sample.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import ReturnPanel

__all__ = [
    "ExplainError",
    "NoValidPoints",
    "TooFewPoints",
    "EmptySet",
    "SingleClassTraining",
    "EmptySplit",
    "InvestmentPoint",
    "ClusterReport",
    "CriteriaRecord",
    "TreeNode",
    "TreeReport",
    "build_points",
    "kmeans",
    "check_criteria",
    "entropy",
    "gini",
    "fit_tree",
    "bull_samples",
    "render_tree",
]


class ExplainError(Exception):
    pass


class NoValidPoints(ExplainError):
    pass


class TooFewPoints(ExplainError):
    pass


class EmptySet(ExplainError):
    pass


class SingleClassTraining(ExplainError):
    pass


class EmptySplit(ExplainError):
    pass


@dataclass(frozen=True)
class InvestmentPoint:
    """One h-day investment: the ratio when bought, the ratio when sold, the ROI."""

    buy_date: dt.date
    ratio_buy: float
    ratio_sell: float
    roi: float

    @property
    def gap(self) -> float:
        """Derived sell-minus-buy spread; positive means bought low, sold high."""
        return self.ratio_sell - self.ratio_buy


def build_points(
    ratio: np.ndarray, rp: ReturnPanel, horizon: int, dates=None
) -> list[InvestmentPoint]:
    """One point per day t where ratio(t), ratio(t+h) and roi_h(t) are all defined."""
    roi = rp.series(horizon)
    n = len(ratio)
    if len(roi) != n:
        raise ValueError("ratio and return panel are not aligned")
    points = []
    for t in range(n - horizon):
        rb, rs, r = ratio[t], ratio[t + horizon], roi[t]
        if np.isfinite(rb) and np.isfinite(rs) and np.isfinite(r):
            day = dates[t] if dates is not None else dt.date(1970, 1, 1) + dt.timedelta(days=t)
            points.append(InvestmentPoint(day, float(rb), float(rs), float(r)))
    if not points:
        raise NoValidPoints(f"no day has ratio, ratio+{horizon}d and roi all defined")
    return points


@dataclass(frozen=True)
class CriteriaRecord:
    exists_buy_low_sell_high: bool
    best_cluster_has_max_roi: bool
    winning_cluster_id: int
    statistic: str = "mean"


@dataclass
class ClusterReport:
    """Lloyd clustering of investment points in (buy, sell) ratio space.

    Only nonempty clusters are reported; labels are compacted to 0..k-1.
    ``wcss_history`` is the within-cluster sum of squares after each
    iteration of the winning restart (non-increasing under exact Lloyd
    steps).
    """

    k: int
    centroids: np.ndarray  # (k, 2) rows of (buy, sell)
    labels: np.ndarray  # (n,) ints in 0..k-1
    sizes: tuple[int, ...]
    mean_roi: tuple[float, ...]
    wcss: float
    wcss_history: tuple[float, ...]
    seed: int
    restarts: int
    criteria: CriteriaRecord | None = field(default=None)

    def to_json(self) -> str:
        payload = {
            "k": self.k,
            "seed": self.seed,
            "restarts": self.restarts,
            "wcss": self.wcss,
            "wcss_history": list(self.wcss_history),
            "centroids": [[float(a), float(b)] for a, b in self.centroids],
            "sizes": list(self.sizes),
            "mean_roi": [None if math.isnan(v) else v for v in self.mean_roi],
            "labels": [int(v) for v in self.labels],
            "criteria": None
            if self.criteria is None
            else {
                "exists_buy_low_sell_high": self.criteria.exists_buy_low_sell_high,
                "best_cluster_has_max_roi": self.criteria.best_cluster_has_max_roi,
                "winning_cluster_id": self.criteria.winning_cluster_id,
                "statistic": self.criteria.statistic,
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _as_xy_roi(points) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(points, np.ndarray):
        xy = np.asarray(points, dtype=np.float64)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise ValueError("expected an (n, 2) array of points")
        return xy, None
    xy = np.array([[p.ratio_buy, p.ratio_sell] for p in points], dtype=np.float64)
    roi = np.array([p.roi for p in points], dtype=np.float64)
    return xy, roi


def _wcss(xy: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    return float(np.sum((xy - centroids[labels]) ** 2))


def _lloyd(xy: np.ndarray, k: int, rng: np.random.Generator, max_iter: int):
    n = len(xy)
    centroids = xy[rng.choice(n, size=k, replace=False)].copy()
    labels = np.full(n, -1)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = ((xy[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        repaired = False
        for j in range(k):
            members = new_labels == j
            if members.any():
                centroids[j] = xy[members].mean(axis=0)
            else:
                # Empty cluster: reseed at the point farthest from its
                # assigned centroid, then let the next pass re-assign.
                dist_own = d2[np.arange(n), new_labels]
                centroids[j] = xy[int(np.argmax(dist_own))]
                repaired = True
        history.append(_wcss(xy, centroids, new_labels))
        if np.array_equal(new_labels, labels):
            if not repaired:
                break
            if len(history) >= 2 and history[-1] == history[-2]:
                break  # repair is cycling without progress (duplicate points)
        labels = new_labels
    return labels, centroids, history


def kmeans(points, k: int, seed: int, restarts: int = 10, max_iter: int = 300) -> ClusterReport:
    """Best-of-``restarts`` Lloyd clustering with squared Euclidean distance.

    Accepts either a list of :class:`InvestmentPoint` (per-cluster mean ROI
    is then reported) or a bare (n, 2) array.  Each restart draws k distinct
    points as initial centroids from its own seeded stream, so results are
    reproducible bit for bit given (points, k, seed, restarts).
    """
    if k < 1:
        raise TooFewPoints("k must be >= 1")
    xy, roi = _as_xy_roi(points)
    n = len(xy)
    if n < k:
        raise TooFewPoints(f"{n} points for k={k}")

    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        labels, centroids, history = _lloyd(xy, k, rng, max_iter)
        wcss = history[-1]
        if best is None or wcss < best[0]:
            best = (wcss, labels, centroids, history)
    wcss, labels, centroids, history = best

    keep = [j for j in range(k) if np.any(labels == j)]
    remap = {j: i for i, j in enumerate(keep)}
    labels = np.array([remap[j] for j in labels])
    centroids = centroids[keep]
    sizes = tuple(int(np.sum(labels == i)) for i in range(len(keep)))
    if roi is None:
        mean_roi = tuple(float("nan") for _ in keep)
    else:
        mean_roi = tuple(float(roi[labels == i].mean()) for i in range(len(keep)))

    return ClusterReport(
        k=len(keep),
        centroids=centroids,
        labels=labels,
        sizes=sizes,
        mean_roi=mean_roi,
        wcss=float(wcss),
        wcss_history=tuple(history),
        seed=seed,
        restarts=restarts,
    )


def check_criteria(report: ClusterReport, points, statistic: str = "mean") -> CriteriaRecord:
    """Evaluate the two buy-low/sell-high consistency criteria.

    1. Some cluster centroid has buy-coordinate < sell-coordinate.
    2. The cluster with the widest (sell - buy) centroid gap also has the
       highest ROI among clusters (mean by default, median as an option).
    """
    if statistic not in ("mean", "median"):
        raise ValueError(f"unknown statistic {statistic!r}")
    xy, roi = _as_xy_roi(points)
    if roi is None:
        raise ValueError("points must carry ROI to evaluate the criteria")
    if len(xy) != len(report.labels):
        raise ValueError("report does not match the supplied points")

    gaps = report.centroids[:, 1] - report.centroids[:, 0]
    exists = bool(np.any(gaps > 0))
    winner = int(np.argmax(gaps))
    agg = np.mean if statistic == "mean" else np.median
    cluster_roi = np.array([agg(roi[report.labels == i]) for i in range(report.k)])
    best_roi = bool(cluster_roi[winner] >= cluster_roi.max())
    return CriteriaRecord(
        exists_buy_low_sell_high=exists,
        best_cluster_has_max_roi=best_roi,
        winning_cluster_id=winner,
        statistic=statistic,
    )


def entropy(class_counts) -> float:
    """Shannon entropy in bits of the label distribution; 0*log0 is 0."""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptySet("entropy of an empty set")
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log2(p)))


def gini(class_counts) -> float:
    """Gini impurity 1 - sum p_i^2 of the label distribution."""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptySet("gini of an empty set")
    p = counts / total
    return float(1.0 - np.sum(p**2))


_IMPURITY = {"entropy": entropy, "gini": gini}


@dataclass
class TreeNode:
    """One node of the single-feature classifier.

    ``class_counts`` is (bull, not-bull).  Internal nodes route
    feature <= threshold to ``left`` and the rest to ``right``.
    """

    impurity: float
    sample_count: int
    class_counts: tuple[int, int]
    predicted_class: str
    split_feature: str | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def predict_one(self, value: float) -> bool:
        node = self
        while not node.is_leaf:
            node = node.left if value <= node.threshold else node.right
        return node.predicted_class == "bull"

    def to_dict(self) -> dict:
        d = {
            "impurity": self.impurity,
            "samples": self.sample_count,
            "class_counts": {"bull": self.class_counts[0], "not_bull": self.class_counts[1]},
            "class": self.predicted_class,
        }
        if not self.is_leaf:
            d["split"] = {"feature": self.split_feature, "threshold": self.threshold}
            d["left"] = self.left.to_dict()
            d["right"] = self.right.to_dict()
        return d


@dataclass(frozen=True)
class TreeReport:
    root: TreeNode
    criterion: str
    max_depth: int
    train_fraction: float
    purged: int
    n_train: int
    n_test: int
    train_accuracy: float
    test_accuracy: float
    test_precision_bull: float
    test_recall_bull: float

    def to_json(self) -> str:
        payload = {
            "criterion": self.criterion,
            "max_depth": self.max_depth,
            "train_fraction": self.train_fraction,
            "purged": self.purged,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "train_accuracy": _nan_null(self.train_accuracy),
            "test_accuracy": _nan_null(self.test_accuracy),
            "test_precision_bull": _nan_null(self.test_precision_bull),
            "test_recall_bull": _nan_null(self.test_recall_bull),
            "tree": self.root.to_dict(),
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _nan_null(v: float):
    return None if isinstance(v, float) and math.isnan(v) else v


def _counts(labels: np.ndarray) -> tuple[int, int]:
    bull = int(labels.sum())
    return bull, int(len(labels) - bull)


def _best_split(values: np.ndarray, labels: np.ndarray, impurity_fn) -> tuple[float, float] | None:
    """Exhaustive scan over midpoints of consecutive distinct sorted values.

    Returns (threshold, gain) for the split maximizing the impurity decrease,
    or None when the feature is constant.  Ties keep the smallest threshold.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    y = labels[order]
    n = len(v)
    parent = impurity_fn(_counts(y))

    distinct = np.flatnonzero(np.diff(v) > 0)  # split after position i
    if distinct.size == 0:
        return None
    cum_bull = np.cumsum(y)
    total_bull = int(cum_bull[-1])

    best_thr, best_gain = None, 0.0
    for i in distinct:
        n_left = int(i) + 1
        bull_left = int(cum_bull[i])
        left = (bull_left, n_left - bull_left)
        right = (total_bull - bull_left, n - n_left - (total_bull - bull_left))
        child = (n_left * impurity_fn(left) + (n - n_left) * impurity_fn(right)) / n
        gain = parent - child
        if gain > best_gain:
            best_gain = gain
            best_thr = (v[i] + v[i + 1]) / 2.0
    if best_thr is None:
        return None
    return float(best_thr), float(best_gain)


def _grow(values: np.ndarray, labels: np.ndarray, impurity_fn, depth: int, max_depth: int) -> TreeNode:
    bull, not_bull = _counts(labels)
    node = TreeNode(
        impurity=impurity_fn((bull, not_bull)),
        sample_count=len(labels),
        class_counts=(bull, not_bull),
        predicted_class="bull" if bull >= not_bull else "not_bull",
    )
    if depth >= max_depth or bull == 0 or not_bull == 0:
        return node
    split = _best_split(values, labels, impurity_fn)
    if split is None:
        return node
    thr, gain = split
    if gain <= 0.0:
        return node
    mask = values <= thr
    if not mask.any() or mask.all():
        raise EmptySplit(f"threshold {thr} produced an empty child")
    node.split_feature = "ratio_buy"
    node.threshold = thr
    node.left = _grow(values[mask], labels[mask], impurity_fn, depth + 1, max_depth)
    node.right = _grow(values[~mask], labels[~mask], impurity_fn, depth + 1, max_depth)
    return node


def fit_tree(
    values: np.ndarray,
    labels: np.ndarray,
    criterion: str = "entropy",
    max_depth: int = 1,
    train_fraction: float = 0.75,
    purge: int = 0,
) -> TreeReport:
    """Greedy single-feature tree on a chronological train/test split.

    The first ``train_fraction`` of the points (they arrive in date order)
    trains the tree; ``purge`` points immediately after the boundary are
    dropped from the test set so overlapping-horizon returns cannot leak
    across the split.  Candidate thresholds are midpoints between
    consecutive distinct sorted feature values; growth stops at
    ``max_depth``, on a pure node, or when no split has positive gain.
    """
    if criterion not in _IMPURITY:
        raise ValueError(f"unknown criterion {criterion!r}")
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError("train_fraction must be in (0, 1]")
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if values.shape != labels.shape:
        raise ValueError("values and labels must have equal length")
    n = len(values)
    n_train = int(math.floor(train_fraction * n))
    if n_train < 2:
        raise SingleClassTraining(f"training set of {n_train} points")
    train_v, train_y = values[:n_train], labels[:n_train]
    test_v, test_y = values[n_train + purge :], labels[n_train + purge :]
    if train_y.all() or not train_y.any():
        raise SingleClassTraining("training labels are a single class")

    impurity_fn = _IMPURITY[criterion]
    root = _grow(train_v, train_y, impurity_fn, depth=0, max_depth=max_depth)

    def metrics(v, y):
        if len(v) == 0:
            return float("nan"), float("nan"), float("nan")
        pred = np.array([root.predict_one(x) for x in v])
        acc = float(np.mean(pred == y))
        tp = int(np.sum(pred & y))
        prec = tp / int(pred.sum()) if pred.any() else float("nan")
        rec = tp / int(y.sum()) if y.any() else float("nan")
        return acc, prec, rec

    train_acc, _, _ = metrics(train_v, train_y)
    test_acc, test_prec, test_rec = metrics(test_v, test_y)
    return TreeReport(
        root=root,
        criterion=criterion,
        max_depth=max_depth,
        train_fraction=train_fraction,
        purged=purge,
        n_train=n_train,
        n_test=len(test_v),
        train_accuracy=train_acc,
        test_accuracy=test_acc,
        test_precision_bull=test_prec,
        test_recall_bull=test_rec,
    )


def bull_samples(
    ratio: np.ndarray, rp: ReturnPanel, horizon: int, bull_threshold: float = 0.20
) -> tuple[np.ndarray, np.ndarray]:
    """Chronological (buy-date ratio, bull label) samples for the tree.

    A point exists for every day where the ratio and the h-day forward ROI
    are both defined; the label is ROI strictly above ``bull_threshold``.
    """
    roi = rp.series(horizon)
    keep = np.isfinite(ratio) & np.isfinite(roi)
    if not keep.any():
        raise NoValidPoints("no day has both ratio and forward ROI defined")
    return ratio[keep].astype(np.float64), roi[keep] > bull_threshold


def render_tree(node: TreeNode, criterion: str, indent: str = "") -> str:
    """Indented text rendering: split criterion, impurity, samples, counts, class."""
    lines = []
    if node.is_leaf:
        lines.append(f"{indent}leaf")
    else:
        lines.append(f"{indent}{node.split_feature} <= {node.threshold:.6g}")
    lines.append(f"{indent}{criterion} = {node.impurity:.4f}")
    lines.append(f"{indent}samples = {node.sample_count}")
    lines.append(f"{indent}value = [bull {node.class_counts[0]}, not_bull {node.class_counts[1]}]")
    lines.append(f"{indent}class = {node.predicted_class}")
    if not node.is_leaf:
        lines.append(f"{indent}-> left (<=):")
        lines.append(render_tree(node.left, criterion, indent + "    "))
        lines.append(f"{indent}-> right (>):")
        lines.append(render_tree(node.right, criterion, indent + "    "))
    return "\n".join(lines)
