/**
 * Thin TypeScript wrapper over the tokenval engine.
 *
 * Every call shells out to the engine CLI and returns its files parsed into
 * tables and reports; the wrapper holds no numerics of its own, so each
 * number here is exactly what the engine wrote.  A handle pairs the dataset
 * file(s) with a private workspace directory for outputs; releasing the
 * handle deletes the workspace, and further use raises InvalidHandleError.
 */

import { existsSync, mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { EngineOptions, CommandResult, fileEndingWith, runEngine } from "./engine.js";
import { EngineDataError, InvalidHandleError } from "./errors.js";
import { parseCsv, Table } from "./table.js";

export { EngineOptions } from "./engine.js";
export {
  EngineError,
  EngineConfigError,
  EngineDataError,
  EngineComputeError,
  InvalidHandleError,
} from "./errors.js";
export { Table, Cell, column } from "./table.js";

/** Mirrors the engine's JSON config schema; all keys optional. */
export interface EngineConfig {
  missing_policy?: { mode?: "ffill" | "reject"; max_gap?: number };
  horizons?: number[];
  ratio?: string;
  pu?: { mute_volatility?: boolean; volatility_window?: number };
  regression?: { lag_policy?: "horizon-1" | "zero" };
  kmeans?: { k?: number; seed?: number; restarts?: number; horizon?: number };
  tree?: {
    criterion?: "entropy" | "gini";
    max_depth?: number;
    train_fraction?: number;
    bull_threshold?: number;
    horizon?: number;
  };
  backtest?: {
    capital?: number;
    fee_rate?: number;
    cap_tokens?: number | null;
    low_quantile?: number;
    high_quantile?: number;
    warmup?: number;
    ma_short?: number;
    ma_long?: number;
    first_signal_only?: boolean;
    strategies?: Array<"pu_quantile" | "ma_cross" | "buy_hold">;
  };
  zones?: { low?: number; high?: number };
}

export interface CallOptions {
  config?: EngineConfig;
  seed?: number;
  from?: string;
  to?: string;
  ratio?: string;
}

export interface RatiosResult {
  proxies: Table;
  returns: Table;
  puZones: Table;
  meta: unknown;
  files: Map<string, Buffer>;
}

export interface Table1Result {
  summary: unknown;
  summaryTable: Table;
  extremes: Table;
  files: Map<string, Buffer>;
}

export interface Table2Result {
  report: unknown;
  grid: Table;
  files: Map<string, Buffer>;
}

export interface ClusterResult {
  report: unknown;
  points: Table;
  files: Map<string, Buffer>;
}

export interface TreeResult {
  report: unknown;
  text: string;
  files: Map<string, Buffer>;
}

export interface BacktestResult {
  comparison: unknown[];
  reports: Record<string, unknown>;
  trades: Record<string, Table>;
  equity: Record<string, Table>;
  equityLong: Table;
  puZones: Table;
  files: Map<string, Buffer>;
}

export class DatasetHandle {
  readonly datasetPaths: string[];
  private workdir: string | null;
  private readonly engineOptions: EngineOptions;
  private configCounter = 0;

  constructor(paths: string[], engineOptions: EngineOptions = {}) {
    this.datasetPaths = paths;
    this.engineOptions = engineOptions;
    this.workdir = mkdtempSync(join(tmpdir(), "tokenval-"));
  }

  /** Output directory for this handle's engine runs (valid until release). */
  get outDir(): string {
    if (this.workdir === null) throw new InvalidHandleError();
    return this.workdir;
  }

  release(): void {
    if (this.workdir !== null) {
      rmSync(this.workdir, { recursive: true, force: true });
      this.workdir = null;
    }
  }

  private invoke(command: string, options: CallOptions): CommandResult {
    const out = this.outDir;
    const argv: string[] = ["--out", out];
    for (const path of this.datasetPaths) {
      argv.push("--dataset", path);
    }
    if (options.config !== undefined) {
      const configPath = join(out, `config_${this.configCounter++}.json`);
      writeFileSync(configPath, JSON.stringify(options.config));
      argv.push("--config", configPath);
    }
    if (options.seed !== undefined) argv.push("--seed", String(options.seed));
    if (options.from !== undefined) argv.push("--from", options.from);
    if (options.to !== undefined) argv.push("--to", options.to);
    if (options.ratio !== undefined) argv.push("--ratio", options.ratio);
    return runEngine(command, argv, this.engineOptions);
  }

  computeRatios(options: CallOptions = {}): RatiosResult {
    const result = this.invoke("metrics", options);
    return {
      proxies: parseCsv(fileEndingWith(result, "_proxies.csv")),
      returns: parseCsv(fileEndingWith(result, "_returns.csv")),
      puZones: parseCsv(fileEndingWith(result, "_pu_zones.csv")),
      meta: JSON.parse(fileEndingWith(result, "_meta.json").toString("utf-8")),
      files: result.files,
    };
  }

  table1(options: CallOptions = {}): Table1Result {
    const result = this.invoke("table1", options);
    return {
      summary: JSON.parse(fileEndingWith(result, "_summary.json").toString("utf-8")),
      summaryTable: parseCsv(fileEndingWith(result, "_summary.csv")),
      extremes: parseCsv(fileEndingWith(result, "_extremes.csv")),
      files: result.files,
    };
  }

  table2(options: CallOptions = {}): Table2Result {
    const result = this.invoke("table2", options);
    return {
      report: JSON.parse(fileEndingWith(result, "_table2.json").toString("utf-8")),
      grid: parseCsv(fileEndingWith(result, "_table2.csv")),
      files: result.files,
    };
  }

  cluster(options: CallOptions = {}): ClusterResult {
    const result = this.invoke("cluster", options);
    return {
      report: JSON.parse(fileEndingWith(result, "_report.json").toString("utf-8")),
      points: parseCsv(fileEndingWith(result, "_points.csv")),
      files: result.files,
    };
  }

  tree(options: CallOptions = {}): TreeResult {
    const result = this.invoke("tree", options);
    return {
      report: JSON.parse(fileEndingWith(result, "_report.json").toString("utf-8")),
      text: fileEndingWith(result, "_tree.txt").toString("utf-8"),
      files: result.files,
    };
  }

  backtest(options: CallOptions = {}): BacktestResult {
    const result = this.invoke("backtest", options);
    const reports: Record<string, unknown> = {};
    const trades: Record<string, Table> = {};
    const equity: Record<string, Table> = {};
    for (const [name, content] of result.files) {
      const match = /^backtest_[0-9a-f]{12}_(.+)_(report\.json|trades\.csv|equity\.csv)$/.exec(name);
      if (!match) continue;
      const strategy = match[1];
      if (match[2] === "report.json") reports[strategy] = JSON.parse(content.toString("utf-8"));
      else if (match[2] === "trades.csv") trades[strategy] = parseCsv(content);
      else equity[strategy] = parseCsv(content);
    }
    return {
      comparison: JSON.parse(
        fileEndingWith(result, "_comparison.json").toString("utf-8"),
      ) as unknown[],
      reports,
      trades,
      equity,
      equityLong: parseCsv(fileEndingWith(result, "_equity_long.csv")),
      puZones: parseCsv(fileEndingWith(result, "_pu_zones.csv")),
      files: result.files,
    };
  }
}

/**
 * Open one or more dataset CSVs (merged engine-side by inner join on date)
 * and return a handle for running analyses against them.
 */
export function load(
  path: string | string[],
  engineOptions: EngineOptions = {},
): DatasetHandle {
  const paths = (Array.isArray(path) ? path : [path]).map((p) => resolve(p));
  for (const p of paths) {
    if (!existsSync(p)) {
      throw new EngineDataError("load", 3, `dataset file not found: ${p}`);
    }
  }
  return new DatasetHandle(paths, engineOptions);
}

// The documented callable surface, one function per engine capability.
export const compute_ratios = (h: DatasetHandle, o: CallOptions = {}) => h.computeRatios(o);
export const table1 = (h: DatasetHandle, o: CallOptions = {}) => h.table1(o);
export const table2 = (h: DatasetHandle, o: CallOptions = {}) => h.table2(o);
export const cluster = (h: DatasetHandle, o: CallOptions = {}) => h.cluster(o);
export const tree = (h: DatasetHandle, o: CallOptions = {}) => h.tree(o);
export const backtest = (h: DatasetHandle, o: CallOptions = {}) => h.backtest(o);
