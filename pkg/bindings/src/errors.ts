/** Typed errors surfaced from the engine CLI, carrying its diagnostic text. */

export class EngineError extends Error {
  readonly command: string;
  readonly exitCode: number;
  /** The engine's single-line diagnostic (stderr), verbatim. */
  readonly diagnostic: string;

  constructor(command: string, exitCode: number, diagnostic: string) {
    super(`engine ${command} failed (exit ${exitCode}): ${diagnostic}`);
    this.name = new.target.name;
    this.command = command;
    this.exitCode = exitCode;
    this.diagnostic = diagnostic;
  }
}

/** Exit 2: invalid configuration or arguments. */
export class EngineConfigError extends EngineError {}

/** Exit 3: dataset ingestion or validation failure. */
export class EngineDataError extends EngineError {}

/** Exit 4: computation failure (degenerate inputs, horizons, ...). */
export class EngineComputeError extends EngineError {}

/** A handle was used after release(); engine state for it no longer exists. */
export class InvalidHandleError extends Error {
  constructor() {
    super("dataset handle has been released");
    this.name = "InvalidHandleError";
  }
}

export function engineErrorFor(command: string, exitCode: number, diagnostic: string): EngineError {
  switch (exitCode) {
    case 2:
      return new EngineConfigError(command, exitCode, diagnostic);
    case 3:
      return new EngineDataError(command, exitCode, diagnostic);
    case 4:
      return new EngineComputeError(command, exitCode, diagnostic);
    default:
      return new EngineError(command, exitCode, diagnostic);
  }
}
