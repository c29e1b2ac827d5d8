"""Summary statistics, predictive regressions with HAC inference, and the
leading principal component of the proxy panel.

The t-statistics here use the Bartlett-kernel long-run variance
(w_j = 1 - j/(L+1)), which is what makes inference on overlapping
multi-day returns honest: an h-day return series sampled daily is
MA(h-1) by construction, so plain OLS standard errors are far too small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import FPC_INPUTS, ProxyPanel, ReturnPanel

__all__ = [
    "StatsError",
    "InsufficientData",
    "DegenerateRegressor",
    "ZeroVarianceColumn",
    "ConvergenceFailure",
    "HorizonSummary",
    "ExtremeEvents",
    "SummaryStats",
    "RegressionResult",
    "PCAResult",
    "summarize_returns",
    "nw_regress",
    "hac_mean_variance",
    "first_pc",
    "attach_fpc",
    "predictive_table",
    "significance_stars",
    "EXTREME_THRESHOLDS",
    "TABLE_PROXIES",
    "TABLE_HORIZONS",
]

EXTREME_THRESHOLDS = (0.05, 0.10, 0.20, 0.30)
# Row / column layout of the predictive comparison table.
TABLE_PROXIES = ("past100", "amr", "tmr", "pmr", "epr", "tvn", "mpr", "upr", "fpc")
TABLE_HORIZONS = (7, 30, 90, 180, 360)

# Two-sided normal critical values at the 10/5/1% levels.
_STAR_CUTOFFS = ((2.5758293035489004, "***"), (1.959963984540054, "**"), (1.6448536269514722, "*"))


class StatsError(Exception):
    pass


class InsufficientData(StatsError):
    pass


class DegenerateRegressor(StatsError):
    pass


class ZeroVarianceColumn(StatsError):
    pass


class ConvergenceFailure(StatsError):
    pass


def significance_stars(t_stat: float) -> str:
    if not np.isfinite(t_stat):
        return ""
    for cutoff, stars in _STAR_CUTOFFS:
        if abs(t_stat) > cutoff:
            return stars
    return ""


def _bartlett_weights(lags: int) -> np.ndarray:
    return 1.0 - np.arange(1, lags + 1) / (lags + 1)


def hac_mean_variance(y: np.ndarray, lags: int) -> float:
    """Bartlett long-run variance of the sample mean of ``y``.

    var(mean) = (gamma_0 + 2 * sum_j w_j gamma_j) / n with demeaned
    autocovariances gamma_j = (1/n) sum_t (y_t - m)(y_{t-j} - m).
    With lags = 0 this reduces to the plain population variance over n.
    """
    n = len(y)
    if lags >= n:
        raise InsufficientData(f"{lags} lags with only {n} observations")
    e = y - y.mean()
    gamma0 = float(e @ e) / n
    lrv = gamma0
    if lags > 0:
        w = _bartlett_weights(lags)
        for j in range(1, lags + 1):
            gamma_j = float(e[j:] @ e[:-j]) / n
            lrv += 2.0 * w[j - 1] * gamma_j
    return max(lrv, 0.0) / n


@dataclass(frozen=True)
class HorizonSummary:
    horizon_days: int
    n_obs: int
    mean: float
    sd: float
    t_stat: float
    sharpe: float
    skewness: float
    kurtosis: float  # raw (not excess) standardized fourth moment
    pct_positive: float
    degenerate: bool = False


@dataclass(frozen=True)
class ExtremeEvents:
    """Daily-return tail counts: strict threshold exceedances on both sides."""

    threshold: float
    disaster_count: int
    disaster_pct: float
    miracle_count: int
    miracle_pct: float


@dataclass(frozen=True)
class SummaryStats:
    horizons: tuple[HorizonSummary, ...]
    extremes: tuple[ExtremeEvents, ...]


def _summarize_one(h: int, y: np.ndarray) -> HorizonSummary:
    y = y[np.isfinite(y)]
    n = len(y)
    if n < 3:
        raise InsufficientData(f"horizon {h}d has {n} defined points (need >= 3)")
    mean = float(y.mean())
    sd = float(y.std(ddof=1))
    pct_positive = float(100.0 * np.mean(y > 0))
    if sd == 0.0:
        return HorizonSummary(
            horizon_days=h, n_obs=n, mean=mean, sd=0.0,
            t_stat=float("nan"), sharpe=float("nan"),
            skewness=float("nan"), kurtosis=float("nan"),
            pct_positive=pct_positive, degenerate=True,
        )
    var = hac_mean_variance(y, lags=h - 1)
    t_stat = mean / np.sqrt(var) if var > 0 else float("nan")
    centered = y - mean
    m2 = float(np.mean(centered**2))
    skew = float(np.mean(centered**3)) / m2**1.5
    kurt = float(np.mean(centered**4)) / m2**2
    return HorizonSummary(
        horizon_days=h, n_obs=n, mean=mean, sd=sd,
        t_stat=float(t_stat), sharpe=mean / sd,
        skewness=skew, kurtosis=kurt, pct_positive=pct_positive,
    )


def summarize_returns(rp: ReturnPanel) -> SummaryStats:
    """Per-horizon moments plus the daily extreme-event table.

    t-statistics use Bartlett lags = horizon - 1 (0 for daily), matching the
    overlap length of the return series.  The extreme-event panel is computed
    from the 1-day series when present.
    """
    rows = tuple(_summarize_one(h, rp.series(h)) for h in rp.horizons)

    extremes: tuple[ExtremeEvents, ...] = ()
    if 1 in rp.horizons:
        daily = rp.series(1)
        daily = daily[np.isfinite(daily)]
        n = len(daily)
        ext = []
        for thr in EXTREME_THRESHOLDS:
            dis = int(np.sum(daily < -thr))
            mir = int(np.sum(daily > thr))
            ext.append(
                ExtremeEvents(
                    threshold=thr,
                    disaster_count=dis,
                    disaster_pct=100.0 * dis / n,
                    miracle_count=mir,
                    miracle_pct=100.0 * mir / n,
                )
            )
        extremes = tuple(ext)
    return SummaryStats(horizons=rows, extremes=extremes)


@dataclass(frozen=True)
class RegressionResult:
    proxy_name: str
    horizon_days: int
    beta: float
    t_stat: float
    r_squared: float
    n_obs: int
    intercept: float
    lags: int

    @property
    def stars(self) -> str:
        return significance_stars(self.t_stat)


def nw_regress(y: np.ndarray, x: np.ndarray, lags: int,
               proxy_name: str = "", horizon_days: int = 0) -> RegressionResult:
    """OLS of y on x with intercept; slope t-stat from the Bartlett HAC variance.

    Rows where either series is NaN are dropped before fitting.  The HAC
    covariance is inv(X'X) @ S @ inv(X'X) with
    S = sum_t e_t^2 x_t x_t' + sum_j w_j sum_t e_t e_{t-j} (x_t x_{t-j}' + x_{t-j} x_t').
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if y.shape != x.shape:
        raise ValueError("y and x must be aligned, equal-length series")
    keep = np.isfinite(y) & np.isfinite(x)
    y, x = y[keep], x[keep]
    n = len(y)
    if n < 3:
        raise InsufficientData(f"{n} jointly-defined pairs (need >= 3)")
    if lags < 0 or lags >= n:
        raise InsufficientData(f"lags must be in [0, n_obs); got {lags} with n={n}")
    if np.ptp(x) == 0.0:
        raise DegenerateRegressor("regressor is constant")

    X = np.column_stack([np.ones(n), x])
    xtx = X.T @ X
    beta_vec = np.linalg.solve(xtx, X.T @ y)
    resid = y - X @ beta_vec

    Z = X * resid[:, None]  # score contributions
    S = Z.T @ Z
    if lags > 0:
        w = _bartlett_weights(lags)
        for j in range(1, lags + 1):
            gamma = Z[j:].T @ Z[:-j]
            S += w[j - 1] * (gamma + gamma.T)
    xtx_inv = np.linalg.inv(xtx)
    hac_cov = xtx_inv @ S @ xtx_inv
    slope_var = hac_cov[1, 1]

    ssr = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ssr / sst if sst > 0 else float("nan")
    t = beta_vec[1] / np.sqrt(slope_var) if slope_var > 0 else float("nan")

    return RegressionResult(
        proxy_name=proxy_name,
        horizon_days=horizon_days,
        beta=float(beta_vec[1]),
        t_stat=float(t),
        r_squared=float(r2),
        n_obs=n,
        intercept=float(beta_vec[0]),
        lags=lags,
    )


@dataclass(frozen=True)
class PCAResult:
    loadings: np.ndarray  # unit-norm vector over the input columns
    scores: np.ndarray  # full-length series, NaN outside jointly-defined rows
    explained_variance_fraction: float
    columns: tuple[str, ...]
    n_obs: int
    iterations: int


def first_pc(
    columns: dict[str, np.ndarray] | np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> PCAResult:
    """Leading principal component of z-scored columns via power iteration.

    Only the first component is needed, so a single-vector power method on
    the correlation matrix suffices; the sign is fixed so the
    largest-magnitude loading is positive.  Scores are the projection of the
    standardized rows and are NaN wherever any input column is undefined.
    """
    if isinstance(columns, dict):
        names = tuple(columns)
        mat = np.column_stack([columns[k] for k in names])
    else:
        mat = np.asarray(columns, dtype=np.float64)
        names = tuple(f"col{i}" for i in range(mat.shape[1]))
    n_rows, p = mat.shape

    joint = np.all(np.isfinite(mat), axis=1)
    data = mat[joint]
    if len(data) < p + 1:
        raise InsufficientData(
            f"{len(data)} jointly-defined rows for {p} columns (need >= {p + 1})"
        )

    mean = data.mean(axis=0)
    sd = data.std(axis=0, ddof=1)
    dead = np.flatnonzero(sd == 0.0)
    if dead.size:
        raise ZeroVarianceColumn(", ".join(names[i] for i in dead))
    z = (data - mean) / sd
    corr = (z.T @ z) / (len(data) - 1)

    v = np.full(p, 1.0 / np.sqrt(p))
    rng = np.random.default_rng(0)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        w = corr @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # Start vector fell in the nullspace; restart from a seeded draw.
            v = rng.standard_normal(p)
            v /= np.linalg.norm(v)
            continue
        v_new = w / norm
        if np.max(np.abs(v_new - v)) < tol:
            v = v_new
            break
        v = v_new
    else:
        raise ConvergenceFailure(f"power iteration did not converge in {max_iter} steps")

    top = int(np.argmax(np.abs(v)))
    if v[top] < 0:
        v = -v
    eigenvalue = float(v @ corr @ v)

    scores = np.full(n_rows, np.nan)
    scores[joint] = z @ v
    return PCAResult(
        loadings=v,
        scores=scores,
        explained_variance_fraction=eigenvalue / float(np.trace(corr)),
        columns=names,
        n_obs=int(len(data)),
        iterations=iterations,
    )


def attach_fpc(panel: ProxyPanel) -> tuple[ProxyPanel, PCAResult]:
    """Compute the first PC of the eight fundamental-to-market proxies and
    return a panel with the ``fpc`` score series filled in."""
    pca = first_pc({name: panel[name] for name in FPC_INPUTS})
    return panel.with_fpc(pca.scores), pca


def predictive_table(
    panel: ProxyPanel,
    rp: ReturnPanel,
    horizons=TABLE_HORIZONS,
    proxies=TABLE_PROXIES,
    lag_policy: str = "horizon-1",
) -> list[RegressionResult]:
    """Univariate predictive regressions of each forward return on each proxy.

    The forward return roi_h(t) is already indexed at the buy date, so the
    regression pairs roi_h(t) with the proxy value observed the same day.
    ``horizon-1`` lags cover the full overlap of consecutive h-day returns;
    ``zero`` gives plain heteroskedasticity-robust t-stats.
    """
    if lag_policy not in ("horizon-1", "zero"):
        raise ValueError(f"unknown lag policy {lag_policy!r}")
    out = []
    for name in proxies:
        xs = panel[name]
        for h in horizons:
            lags = h - 1 if lag_policy == "horizon-1" else 0
            out.append(
                nw_regress(rp.series(h), xs, lags=lags, proxy_name=name, horizon_days=h)
            )
    return out
