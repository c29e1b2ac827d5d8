"""Valuation analytics and backtesting for daily cryptocurrency time series.

The pipeline: :mod:`tokenval.ingest` turns vendor CSV exports into a
validated :class:`~tokenval.ingest.MarketDataset`; :mod:`tokenval.metrics`
derives per-day proxies, valuation ratios, and forward returns;
:mod:`tokenval.stats` runs summary statistics and HAC predictive
regressions; :mod:`tokenval.explain` checks the buy-low/sell-high story
with clustering and a decision tree; :mod:`tokenval.backtest` simulates
signal-driven trading with fees and trade caps.  :mod:`tokenval.cli`
exposes the same pipeline as subcommands.
"""

from .backtest import (
    BUY,
    HOLD,
    SELL,
    BacktestReport,
    Trade,
    run,
    signal_buy_hold,
    signal_ma_cross,
    signal_pu_quantile,
)
from .explain import (
    ClusterReport,
    CriteriaRecord,
    InvestmentPoint,
    TreeNode,
    TreeReport,
    build_points,
    bull_samples,
    check_criteria,
    entropy,
    fit_tree,
    gini,
    kmeans,
    render_tree,
)
from .ingest import (
    DEFAULT_SCHEMA,
    MarketDataset,
    MissingPolicy,
    RawTable,
    build_dataset,
    load_market_csv,
    parse_csv,
    read_market_csv,
    validate,
)
from .metrics import (
    ProxyPanel,
    ReturnPanel,
    adoption_ratios,
    build_proxy_panel,
    dilution_rate,
    nvt_ratio,
    past100,
    pe_ratio,
    pm_ratio,
    pu_ratio,
    returns,
    staking_ratio,
    token_utility,
    velocity,
    volatility,
)
from .stats import (
    PCAResult,
    RegressionResult,
    SummaryStats,
    attach_fpc,
    first_pc,
    nw_regress,
    predictive_table,
    summarize_returns,
)

__version__ = "0.1.0"

run_backtest = run
