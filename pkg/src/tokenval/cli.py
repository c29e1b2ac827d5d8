"""Command-line front end: ingestion -> metrics -> stats/explain/backtest.

Subcommands: metrics, table1, table2, cluster, tree, backtest.  Behavior is
driven by a JSON config file plus flag overrides (flags win); every output
filename is derived from the command name and a hash of the effective
config, and file contents are byte-deterministic, so re-running a command
with unchanged inputs rewrites identical files.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from . import backtest as bt
from . import explain, metrics, stats
from .ingest import IngestError, MissingPolicy, build_dataset, parse_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_COMPUTE = 4


class ConfigError(Exception):
    pass


def _sample_path() -> str:
    return str(resources.files("tokenval").joinpath("data/sample_market.csv"))


@dataclass
class RunConfig:
    """Validated effective configuration for one command invocation."""

    datasets: list[dict] = field(default_factory=list)  # {"path": str, "schema": dict|None}
    missing_policy: dict = field(default_factory=lambda: {"mode": "ffill", "max_gap": 3})
    date_from: str | None = None
    date_to: str | None = None
    horizons: list[int] = field(default_factory=lambda: [1, 7, 30, 90, 180, 360])
    ratio: str = "pu_ratio"
    pu: dict = field(default_factory=lambda: {"mute_volatility": True, "volatility_window": 180})
    regression: dict = field(default_factory=lambda: {"lag_policy": "horizon-1"})
    kmeans: dict = field(
        default_factory=lambda: {"k": 4, "seed": 0, "restarts": 10, "horizon": 90}
    )
    tree: dict = field(
        default_factory=lambda: {
            "criterion": "entropy",
            "max_depth": 1,
            "train_fraction": 0.75,
            "bull_threshold": 0.2,
            "horizon": 180,
        }
    )
    backtest: dict = field(
        default_factory=lambda: {
            "capital": 100_000.0,
            "fee_rate": 0.001,
            "cap_tokens": 100.0,
            "low_quantile": 0.1,
            "high_quantile": 0.9,
            "warmup": 30,
            "ma_short": 20,
            "ma_long": 100,
            "first_signal_only": False,
            "strategies": ["pu_quantile", "ma_cross", "buy_hold"],
        }
    )
    zones: dict = field(default_factory=lambda: {"low": 60.0, "high": 100.0})
    out_dir: str = "out"

    def validate(self) -> None:
        if not self.datasets:
            self.datasets = [{"path": _sample_path(), "schema": None}]
        for entry in self.datasets:
            if not os.path.exists(entry["path"]):
                raise ConfigError(f"dataset file not found: {entry['path']}")
        MissingPolicy(**self.missing_policy)  # domain check
        for label, value in (("from", self.date_from), ("to", self.date_to)):
            if value is not None:
                try:
                    dt.date.fromisoformat(value)
                except ValueError:
                    raise ConfigError(f"--{label}: not an ISO date: {value!r}") from None
        if any(h <= 0 for h in self.horizons):
            raise ConfigError("horizons must be positive day counts")
        if self.pu["volatility_window"] not in metrics.VOLATILITY_WINDOWS:
            raise ConfigError(f"volatility_window must be one of {metrics.VOLATILITY_WINDOWS}")
        if self.regression["lag_policy"] not in ("horizon-1", "zero"):
            raise ConfigError("lag_policy must be 'horizon-1' or 'zero'")
        km = self.kmeans
        if km["k"] < 1 or km["restarts"] < 1 or km["horizon"] < 1:
            raise ConfigError("kmeans k, restarts and horizon must be >= 1")
        tr = self.tree
        if tr["criterion"] not in ("entropy", "gini"):
            raise ConfigError("tree criterion must be 'entropy' or 'gini'")
        if not 0.0 < tr["train_fraction"] <= 1.0:
            raise ConfigError("train_fraction must be in (0, 1]")
        if tr["max_depth"] < 1:
            raise ConfigError("max_depth must be >= 1")
        b = self.backtest
        if b["capital"] <= 0 or b["fee_rate"] < 0:
            raise ConfigError("capital must be > 0 and fee_rate >= 0")
        if b["cap_tokens"] is not None and b["cap_tokens"] <= 0:
            raise ConfigError("cap_tokens must be positive or null")
        if not 0.0 < b["low_quantile"] < b["high_quantile"] < 1.0:
            raise ConfigError("need 0 < low_quantile < high_quantile < 1")
        if b["ma_short"] >= b["ma_long"]:
            raise ConfigError("ma_short must be below ma_long")
        unknown = set(b["strategies"]) - {"pu_quantile", "ma_cross", "buy_hold"}
        if unknown:
            raise ConfigError(f"unknown strategies: {sorted(unknown)}")

    def canonical(self) -> dict:
        # The output directory is where results land, not part of what is
        # computed; leaving it out keeps filenames and echoed configs (and
        # therefore output bytes) identical across destinations.
        payload = asdict(self)
        payload.pop("out_dir")
        return payload

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        for key, value in raw.items():
            attr = {"from": "date_from", "to": "date_to"}.get(key, key)
            if not hasattr(cfg, attr):
                raise ConfigError(f"unknown config key: {key!r}")
            current = getattr(cfg, attr)
            if isinstance(current, dict) and isinstance(value, dict):
                current.update(value)
            else:
                setattr(cfg, attr, value)

    # Flags override the file.
    if args.out:
        cfg.out_dir = args.out
    if getattr(args, "date_from", None):
        cfg.date_from = args.date_from
    if getattr(args, "date_to", None):
        cfg.date_to = args.date_to
    if args.seed is not None:
        cfg.kmeans["seed"] = args.seed
    if getattr(args, "dataset", None):
        cfg.datasets = [{"path": p, "schema": None} for p in args.dataset]
    for flag, (section, key) in _FLAG_MAP.items():
        value = getattr(args, flag, None)
        if value is not None:
            if section is None:
                setattr(cfg, key, value)
            else:
                getattr(cfg, section)[key] = value
    if getattr(args, "no_cap", False):
        cfg.backtest["cap_tokens"] = None
    cfg.validate()
    return cfg


_FLAG_MAP = {
    # argparse dest -> (config section or None, key)
    "ratio_name": (None, "ratio"),
    "horizons": (None, "horizons"),
    "mute_volatility": ("pu", "mute_volatility"),
    "vol_window": ("pu", "volatility_window"),
    "lag_policy": ("regression", "lag_policy"),
    "k": ("kmeans", "k"),
    "restarts": ("kmeans", "restarts"),
    "cluster_horizon": ("kmeans", "horizon"),
    "criterion": ("tree", "criterion"),
    "max_depth": ("tree", "max_depth"),
    "train_fraction": ("tree", "train_fraction"),
    "bull_threshold": ("tree", "bull_threshold"),
    "tree_horizon": ("tree", "horizon"),
    "capital": ("backtest", "capital"),
    "fee_rate": ("backtest", "fee_rate"),
    "cap_tokens": ("backtest", "cap_tokens"),
    "low_q": ("backtest", "low_quantile"),
    "high_q": ("backtest", "high_quantile"),
    "warmup": ("backtest", "warmup"),
    "ma_short": ("backtest", "ma_short"),
    "ma_long": ("backtest", "ma_long"),
    "strategies": ("backtest", "strategies"),
    "zone_low": ("zones", "low"),
    "zone_high": ("zones", "high"),
}


def _load_dataset(cfg: RunConfig):
    tables = []
    for entry in cfg.datasets:
        with open(entry["path"], "r", encoding="utf-8") as fh:
            tables.append(parse_csv(fh.read(), schema=entry.get("schema"), source=entry["path"]))
    ds = build_dataset(tables, MissingPolicy(**cfg.missing_policy))
    if cfg.date_from or cfg.date_to:
        lo = dt.date.fromisoformat(cfg.date_from) if cfg.date_from else ds.start
        hi = dt.date.fromisoformat(cfg.date_to) if cfg.date_to else ds.end
        ds = ds.slice(lo, hi)
    return ds


def _panel_with_fpc(ds, cfg: RunConfig):
    panel = metrics.build_proxy_panel(
        ds,
        mute_volatility=cfg.pu["mute_volatility"],
        volatility_window=cfg.pu["volatility_window"],
    )
    fpc_error = None
    try:
        panel, _ = stats.attach_fpc(panel)
    except stats.StatsError as exc:
        fpc_error = str(exc)
    return panel, fpc_error


def _write(out_dir: str, name: str, content: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(content)
    print(path)
    return path


def _json_dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _num(v: float):
    return None if v is None or (isinstance(v, float) and not np.isfinite(v)) else float(v)


def _long_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["series", "date", "value"])
    for series, date, value in rows:
        writer.writerow([series, date.isoformat(), "" if not np.isfinite(value) else repr(float(value))])
    return buf.getvalue()


def cmd_metrics(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg)
    panel, fpc_error = _panel_with_fpc(ds, cfg)
    rp = metrics.returns(ds, horizons=cfg.horizons)
    tag = f"metrics_{cfg.hash()}"
    dates = ds.dates
    _write(cfg.out_dir, f"{tag}_proxies.csv", panel.to_csv(dates))
    _write(cfg.out_dir, f"{tag}_returns.csv", rp.to_csv(dates))
    pu = panel["pu_ratio"]
    zone_rows = [("pu_ratio", d, float(pu[i])) for i, d in enumerate(dates)]
    zone_rows += [("zone_low", d, cfg.zones["low"]) for d in dates]
    zone_rows += [("zone_high", d, cfg.zones["high"]) for d in dates]
    _write(cfg.out_dir, f"{tag}_pu_zones.csv", _long_csv(zone_rows))
    meta = {
        "config": cfg.canonical(),
        "dataset": {
            "start": ds.start.isoformat(),
            "end": ds.end.isoformat(),
            "rows": len(ds),
            "flags": list(ds.flags),
        },
        "fpc": {"computed": fpc_error is None, "error": fpc_error},
    }
    _write(cfg.out_dir, f"{tag}_meta.json", _json_dumps(meta))
    return EXIT_OK


def cmd_table1(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg)
    rp = metrics.returns(ds, horizons=cfg.horizons)
    summary = stats.summarize_returns(rp)
    tag = f"table1_{cfg.hash()}"

    payload = {
        "window": {"start": ds.start.isoformat(), "end": ds.end.isoformat(), "days": len(ds)},
        "horizons": [
            {
                "horizon_days": h.horizon_days,
                "n_obs": h.n_obs,
                "mean": _num(h.mean),
                "sd": _num(h.sd),
                "t_stat": _num(h.t_stat),
                "sharpe": _num(h.sharpe),
                "skewness": _num(h.skewness),
                "kurtosis": _num(h.kurtosis),
                "pct_positive": _num(h.pct_positive),
                "degenerate": h.degenerate,
            }
            for h in summary.horizons
        ],
        "extreme_events": [
            {
                "threshold": e.threshold,
                "disaster_count": e.disaster_count,
                "disaster_pct": e.disaster_pct,
                "miracle_count": e.miracle_count,
                "miracle_pct": e.miracle_pct,
            }
            for e in summary.extremes
        ],
    }
    _write(cfg.out_dir, f"{tag}_summary.json", _json_dumps(payload))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["horizon_days", "n_obs", "mean", "sd", "t_stat", "sharpe", "skewness", "kurtosis", "pct_positive"]
    )
    for h in summary.horizons:
        writer.writerow(
            [h.horizon_days, h.n_obs]
            + ["" if not np.isfinite(v) else repr(float(v))
               for v in (h.mean, h.sd, h.t_stat, h.sharpe, h.skewness, h.kurtosis, h.pct_positive)]
        )
    _write(cfg.out_dir, f"{tag}_summary.csv", buf.getvalue())

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "disaster_count", "disaster_pct", "miracle_count", "miracle_pct"])
    for e in summary.extremes:
        writer.writerow([e.threshold, e.disaster_count, repr(e.disaster_pct), e.miracle_count, repr(e.miracle_pct)])
    _write(cfg.out_dir, f"{tag}_extremes.csv", buf.getvalue())
    return EXIT_OK


def cmd_table2(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg)
    panel, fpc_error = _panel_with_fpc(ds, cfg)
    proxies = list(stats.TABLE_PROXIES)
    if fpc_error is not None:
        proxies.remove("fpc")
    horizons = [h for h in cfg.horizons if h > 1] or list(stats.TABLE_HORIZONS)
    rp = metrics.returns(ds, horizons=horizons)
    rows = stats.predictive_table(
        panel, rp, horizons=horizons, proxies=proxies,
        lag_policy=cfg.regression["lag_policy"],
    )
    tag = f"table2_{cfg.hash()}"

    payload = {
        "lag_policy": cfg.regression["lag_policy"],
        "fpc_error": fpc_error,
        "cells": [
            {
                "proxy": r.proxy_name,
                "horizon_days": r.horizon_days,
                "beta": _num(r.beta),
                "t_stat": _num(r.t_stat),
                "r_squared": _num(r.r_squared),
                "n_obs": r.n_obs,
                "lags": r.lags,
                "stars": r.stars,
            }
            for r in rows
        ],
    }
    _write(cfg.out_dir, f"{tag}_table2.json", _json_dumps(payload))

    by_cell = {(r.proxy_name, r.horizon_days): r for r in rows}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["proxy"]
    for h in horizons:
        header += [f"beta_{h}d", f"stars_{h}d", f"t_{h}d", f"r2_{h}d"]
    writer.writerow(header)
    for proxy in proxies:
        row = [proxy]
        for h in horizons:
            r = by_cell[(proxy, h)]
            row += [repr(r.beta), r.stars, repr(r.t_stat), repr(r.r_squared)]
        writer.writerow(row)
    _write(cfg.out_dir, f"{tag}_table2.csv", buf.getvalue())
    return EXIT_OK


def _ratio_series(panel, name: str):
    if name not in panel.series:
        raise ConfigError(f"unknown ratio {name!r}; choose one of {sorted(panel.series)}")
    return panel[name]


def cmd_cluster(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg)
    panel, _ = _panel_with_fpc(ds, cfg)
    horizon = int(cfg.kmeans["horizon"])
    rp = metrics.returns(ds, horizons=(horizon,))
    ratio = _ratio_series(panel, cfg.ratio)
    points = explain.build_points(ratio, rp, horizon, dates=ds.dates)
    report = explain.kmeans(
        points, k=int(cfg.kmeans["k"]), seed=int(cfg.kmeans["seed"]),
        restarts=int(cfg.kmeans["restarts"]),
    )
    report.criteria = explain.check_criteria(report, points)
    tag = f"cluster_{cfg.hash()}"
    _write(cfg.out_dir, f"{tag}_report.json", report.to_json() + "\n")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", "ratio_buy", "ratio_sell", "roi", "cluster"])
    for p, label in zip(points, report.labels):
        writer.writerow(
            [p.buy_date.isoformat(), repr(p.ratio_buy), repr(p.ratio_sell), repr(p.roi), int(label)]
        )
    _write(cfg.out_dir, f"{tag}_points.csv", buf.getvalue())
    return EXIT_OK


def cmd_tree(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg)
    panel, _ = _panel_with_fpc(ds, cfg)
    horizon = int(cfg.tree["horizon"])
    rp = metrics.returns(ds, horizons=(horizon,))
    ratio = _ratio_series(panel, cfg.ratio)
    values, labels = explain.bull_samples(
        ratio, rp, horizon, bull_threshold=float(cfg.tree["bull_threshold"])
    )
    report = explain.fit_tree(
        values, labels,
        criterion=cfg.tree["criterion"],
        max_depth=int(cfg.tree["max_depth"]),
        train_fraction=float(cfg.tree["train_fraction"]),
        purge=horizon - 1,
    )
    tag = f"tree_{cfg.hash()}"
    _write(cfg.out_dir, f"{tag}_report.json", report.to_json() + "\n")
    _write(
        cfg.out_dir, f"{tag}_tree.txt",
        explain.render_tree(report.root, cfg.tree["criterion"]) + "\n",
    )
    return EXIT_OK


def _run_strategy(name: str, ds, panel, cfg: RunConfig):
    b = cfg.backtest
    if name == "pu_quantile":
        ratio = panel[cfg.ratio]
        signals = bt.signal_pu_quantile(
            ratio, low_q=b["low_quantile"], high_q=b["high_quantile"], warmup=int(b["warmup"])
        )
        signal_values = ratio
        params = {k: b[k] for k in ("low_quantile", "high_quantile", "warmup")}
        params["ratio"] = cfg.ratio
    elif name == "ma_cross":
        signals = bt.signal_ma_cross(ds.price_usd, short_w=int(b["ma_short"]), long_w=int(b["ma_long"]))
        signal_values = ds.price_usd
        params = {"ma_short": b["ma_short"], "ma_long": b["ma_long"]}
    elif name == "buy_hold":
        signals = bt.signal_buy_hold(len(ds))
        signal_values = ds.price_usd
        params = {}
    else:  # pragma: no cover - validated earlier
        raise ConfigError(f"unknown strategy {name!r}")
    params.update({k: b[k] for k in ("capital", "fee_rate", "cap_tokens", "first_signal_only")})
    return bt.run(
        ds, signals,
        capital=float(b["capital"]),
        fee_rate=float(b["fee_rate"]),
        cap_tokens=None if b["cap_tokens"] is None else float(b["cap_tokens"]),
        signal_values=signal_values,
        strategy=name,
        params=params,
        first_signal_only=bool(b["first_signal_only"]),
    )


def cmd_backtest(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg)
    panel, _ = _panel_with_fpc(ds, cfg)
    tag = f"backtest_{cfg.hash()}"
    dates = ds.dates
    comparison = []
    equity_rows = []
    for name in cfg.backtest["strategies"]:
        report = _run_strategy(name, ds, panel, cfg)
        _write(cfg.out_dir, f"{tag}_{name}_report.json", report.to_json() + "\n")
        _write(cfg.out_dir, f"{tag}_{name}_trades.csv", report.trades_csv())
        _write(cfg.out_dir, f"{tag}_{name}_equity.csv", report.equity_csv(dates))
        comparison.append(report.summary_dict())
        equity_rows += [(name, d, float(report.equity[i])) for i, d in enumerate(dates)]
    _write(cfg.out_dir, f"{tag}_comparison.json", _json_dumps(comparison))
    _write(cfg.out_dir, f"{tag}_equity_long.csv", _long_csv(equity_rows))

    pu = panel["pu_ratio"]
    zone_rows = [("pu_ratio", d, float(pu[i])) for i, d in enumerate(dates)]
    zone_rows += [("zone_low", d, cfg.zones["low"]) for d in dates]
    zone_rows += [("zone_high", d, cfg.zones["high"]) for d in dates]
    _write(cfg.out_dir, f"{tag}_pu_zones.csv", _long_csv(zone_rows))
    return EXIT_OK


COMMANDS = {
    "metrics": cmd_metrics,
    "table1": cmd_table1,
    "table2": cmd_table2,
    "cluster": cmd_cluster,
    "tree": cmd_tree,
    "backtest": cmd_backtest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokenval",
        description="Valuation analytics and strategy backtests for daily crypto time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, help="seed override for randomized steps")
        p.add_argument("--from", dest="date_from", help="slice start date (ISO)")
        p.add_argument("--to", dest="date_to", help="slice end date (ISO)")
        p.add_argument("--dataset", action="append", help="dataset CSV path (repeatable)")
        p.add_argument("--ratio", dest="ratio_name", help="ratio series name (default pu_ratio)")

    p = sub.add_parser("metrics", help="proxy panel and return CSVs")
    add_common(p)
    p.add_argument("--vol-window", dest="vol_window", type=int)
    p.add_argument("--with-volatility", dest="mute_volatility", action="store_const", const=False)

    p = sub.add_parser("table1", help="summary statistics by horizon")
    add_common(p)
    p.add_argument("--horizons", type=lambda s: [int(x) for x in s.split(",")])

    p = sub.add_parser("table2", help="predictive regression grid")
    add_common(p)
    p.add_argument("--horizons", type=lambda s: [int(x) for x in s.split(",")])
    p.add_argument("--lag-policy", dest="lag_policy", choices=["horizon-1", "zero"])

    p = sub.add_parser("cluster", help="k-means buy/sell consistency check")
    add_common(p)
    p.add_argument("--k", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--horizon", dest="cluster_horizon", type=int)

    p = sub.add_parser("tree", help="bull-market decision tree")
    add_common(p)
    p.add_argument("--criterion", choices=["entropy", "gini"])
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--bull-threshold", dest="bull_threshold", type=float)
    p.add_argument("--horizon", dest="tree_horizon", type=int)

    p = sub.add_parser("backtest", help="run the trading strategies")
    add_common(p)
    p.add_argument("--capital", type=float)
    p.add_argument("--fee-rate", dest="fee_rate", type=float)
    p.add_argument("--cap", dest="cap_tokens", type=float)
    p.add_argument("--no-cap", dest="no_cap", action="store_true")
    p.add_argument("--low-q", dest="low_q", type=float)
    p.add_argument("--high-q", dest="high_q", type=float)
    p.add_argument("--warmup", type=int)
    p.add_argument("--ma-short", dest="ma_short", type=int)
    p.add_argument("--ma-long", dest="ma_long", type=int)
    p.add_argument("--strategy", dest="strategies", action="append",
                   choices=["pu_quantile", "ma_cross", "buy_hold"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        cfg = load_config(args)
        return COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"tokenval {command}: error: ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IngestError as exc:
        print(f"tokenval {command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (metrics.HorizonExceedsData, stats.StatsError, explain.ExplainError,
            bt.BacktestError) as exc:
        print(f"tokenval {command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
