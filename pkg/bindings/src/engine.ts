/** Process plumbing: run the engine CLI, collect the files it reports. */

import { spawnSync } from "node:child_process";
import { readFileSync } from "node:fs";
import { basename } from "node:path";

import { engineErrorFor } from "./errors.js";

export interface EngineOptions {
  /** Python interpreter used to invoke the engine (default: python3). */
  python?: string;
}

export interface CommandResult {
  /** Engine output files keyed by basename, byte for byte. */
  files: Map<string, Buffer>;
  /** Absolute paths as printed by the engine, in emission order. */
  paths: string[];
}

export function runEngine(
  command: string,
  argv: string[],
  options: EngineOptions = {},
): CommandResult {
  const python = options.python ?? process.env.TOKENVAL_PYTHON ?? "python3";
  const proc = spawnSync(python, ["-m", "tokenval.cli", command, ...argv], {
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw proc.error;
  }
  if (proc.status !== 0) {
    const diagnostic = (proc.stderr ?? "").trim().split("\n").pop() ?? "";
    throw engineErrorFor(command, proc.status ?? -1, diagnostic);
  }
  const paths = (proc.stdout ?? "")
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
  const files = new Map<string, Buffer>();
  for (const path of paths) {
    files.set(basename(path), readFileSync(path));
  }
  return { files, paths };
}

export function fileEndingWith(result: CommandResult, suffix: string): Buffer {
  for (const [name, content] of result.files) {
    if (name.endsWith(suffix)) return content;
  }
  throw new Error(`engine produced no file ending with ${JSON.stringify(suffix)}`);
}
