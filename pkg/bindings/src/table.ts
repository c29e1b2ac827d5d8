/** Tabular result holder: parsed cells for convenience, raw bytes for parity. */

export type Cell = number | string | null;

export interface Table {
  columns: string[];
  rows: Cell[][];
  /** The engine's file content, byte for byte. */
  raw: Buffer;
}

const NUMERIC = /^-?(\d+\.?\d*|\.\d+)(e[+-]?\d+)?$/i;

/**
 * Parse an engine CSV. The engine never emits quoted or escaped cells
 * (dates, repr floats, enum words, integers), so a plain split is exact.
 */
export function parseCsv(raw: Buffer): Table {
  const text = raw.toString("utf-8");
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    return { columns: [], rows: [], raw };
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line) =>
    line.split(",").map((cell): Cell => {
      if (cell === "") return null;
      if (NUMERIC.test(cell)) return Number(cell);
      return cell;
    }),
  );
  return { columns, rows, raw };
}

export function column(table: Table, name: string): Cell[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) throw new Error(`no column ${JSON.stringify(name)} in table`);
  return table.rows.map((row) => row[idx]);
}
