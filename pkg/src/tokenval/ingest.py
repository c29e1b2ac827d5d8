"""Daily market/on-chain dataset ingestion.

Vendor CSV exports come in with a column mapping, a validated
:class:`MarketDataset` comes out.  The dataset is the single input to every
downstream computation (ratio panels, regressions, clustering, backtests),
all of which consume it read-only.

Input CSV contract: UTF-8, header row, comma separated, ISO-8601 dates,
``.`` decimal point, empty cell = missing value.  Output (canonical) CSV
uses the exact ``MarketDataset`` field names in declaration order and
round-trips bit-exactly through :func:`read_market_csv`.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "IngestError",
    "MissingDateColumn",
    "DuplicateDate",
    "NonMonotoneDate",
    "EmptyOverlap",
    "UnfilledGap",
    "InvariantViolation",
    "RangeOutOfBounds",
    "MissingPolicy",
    "RawTable",
    "MarketDataset",
    "DEFAULT_SCHEMA",
    "parse_csv",
    "build_dataset",
    "validate",
    "read_market_csv",
]


class IngestError(Exception):
    """Base class for dataset construction failures."""


class MissingDateColumn(IngestError):
    pass


class DuplicateDate(IngestError):
    pass


class NonMonotoneDate(IngestError):
    pass


class EmptyOverlap(IngestError):
    pass


class UnfilledGap(IngestError):
    def __init__(self, column: str, date: dt.date, length: int):
        self.column = column
        self.date = date
        self.length = length
        super().__init__(
            f"column {column!r}: gap of {length} day(s) starting {date.isoformat()} "
            "exceeds the fill policy"
        )


class InvariantViolation(IngestError):
    def __init__(self, row: int, date: dt.date, column: str, message: str):
        self.row = row
        self.date = date
        self.column = column
        super().__init__(f"row {row} ({date.isoformat()}), field {column!r}: {message}")


class RangeOutOfBounds(IngestError):
    pass


# Canonical value columns, in output order.  Dates are carried separately as
# integer day ordinals: exactness matters only for the calendar index.
MARKET_FIELDS = (
    "price_usd",
    "market_cap_usd",
    "supply",
    "issuance",
    "fees_usd",
    "block_rewards_usd",
    "volume_usd",
    "active_addresses",
    "tx_count",
    "transfer_count",
    "supply_active_1y",
)

# Intermediate targets accepted from vendor files: total 24h volume is the
# sum of on-chain and off-chain transacted value when both sources are mapped.
_VOLUME_PARTS = ("volume_onchain_usd", "volume_offchain_usd")
_TARGETS = ("date",) + MARKET_FIELDS + _VOLUME_PARTS

# Defaults mirror the well-known public daily exports (CoinMetrics community
# columns, plus the exchange-volume column of CoinMarketCap-style files).
# Canonical names always map to themselves.
DEFAULT_SCHEMA: dict[str, str] = {
    "date": "date",
    "time": "date",
    "Date": "date",
    "PriceUSD": "price_usd",
    "CapMrktCurUSD": "market_cap_usd",
    "SplyCur": "supply",
    "IssContNtv": "issuance",
    "FeeTotUSD": "fees_usd",
    "IssContUSD": "block_rewards_usd",
    "TxTfrValUSD": "volume_onchain_usd",
    "Volume": "volume_offchain_usd",
    "AdrActCnt": "active_addresses",
    "TxCnt": "tx_count",
    "TxTfrCnt": "transfer_count",
    "SplyAct1yr": "supply_active_1y",
}
DEFAULT_SCHEMA.update({name: name for name in _TARGETS})


@dataclass(frozen=True)
class MissingPolicy:
    """How interior missing values are handled when tables are merged.

    ``ffill`` forward-fills runs of up to ``max_gap`` consecutive missing
    days (exchange-holiday scale); anything longer, or any gap under
    ``reject``, is a hard :class:`UnfilledGap`.  Silent long interpolation
    would corrupt the downstream regressions.
    """

    mode: str = "ffill"  # "ffill" | "reject"
    max_gap: int = 3

    def __post_init__(self):
        if self.mode not in ("ffill", "reject"):
            raise ValueError(f"unknown missing-value mode {self.mode!r}")
        if self.max_gap < 0:
            raise ValueError("max_gap must be >= 0")


@dataclass(frozen=True)
class RawTable:
    """One parsed source file: strictly increasing dates, column-major cells.

    Cell value ``None`` means missing (blank or unparseable numeric text).
    Every column tuple has exactly one entry per date.
    """

    dates: tuple[dt.date, ...]
    columns: dict[str, tuple]
    source: str = ""

    def __post_init__(self):
        for name, cells in self.columns.items():
            if len(cells) != len(self.dates):
                raise ValueError(f"column {name!r} length mismatch")

    @property
    def n_rows(self) -> int:
        return len(self.dates)


def parse_csv(text: str, schema: dict[str, str] | None = None, source: str = "") -> RawTable:
    """Parse one vendor CSV into a :class:`RawTable` of canonical columns.

    ``schema`` maps source header names to canonical targets (see
    ``DEFAULT_SCHEMA``); unmapped headers are ignored.  Numeric cells that
    fail to parse become missing values rather than errors; dates must be
    ISO-8601 and strictly increasing.
    """
    schema = DEFAULT_SCHEMA if schema is None else schema
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingDateColumn(f"{source or 'input'}: empty file, no header row") from None

    header = [h.strip() for h in header]
    targets = [schema.get(h) for h in header]
    if "date" not in targets:
        raise MissingDateColumn(f"{source or 'input'}: no column maps to 'date'")
    date_idx = targets.index("date")

    value_cols: list[tuple[int, str]] = []
    for i, t in enumerate(targets):
        if t is None or t == "date" or any(t == seen for _, seen in value_cols):
            continue  # first header wins when two map to the same target
        value_cols.append((i, t))
    dates: list[dt.date] = []
    cells: dict[str, list] = {t: [] for _, t in value_cols}

    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if date_idx >= len(row) or not row[date_idx].strip():
            raise ValueError(f"{source or 'input'} line {line_no}: row has no date cell")
        raw_date = row[date_idx].strip()
        # Tolerate timestamped exports ("2020-01-01T00:00:00Z", "2020-01-01 00:00").
        day = dt.date.fromisoformat(raw_date[:10])
        if dates:
            if day == dates[-1]:
                raise DuplicateDate(f"{source or 'input'} line {line_no}: {day.isoformat()}")
            if day < dates[-1]:
                raise NonMonotoneDate(
                    f"{source or 'input'} line {line_no}: {day.isoformat()} after "
                    f"{dates[-1].isoformat()}"
                )
        dates.append(day)
        for i, target in value_cols:
            cell = row[i].strip() if i < len(row) else ""
            value = None
            if cell:
                try:
                    value = float(cell)
                except ValueError:
                    value = None
                else:
                    if not np.isfinite(value):
                        value = None
            cells[target].append(value)

    return RawTable(
        dates=tuple(dates),
        columns={k: tuple(v) for k, v in cells.items()},
        source=source,
    )


@dataclass(frozen=True)
class MarketDataset:
    """Validated, date-aligned daily table of market and on-chain series.

    The index is a contiguous daily calendar starting at ``start``; every
    value column is a read-only float64 array of equal length.  ``flags``
    records known degradations (e.g. off-chain volume absent from the
    sources), not errors.
    """

    start: dt.date
    price_usd: np.ndarray
    market_cap_usd: np.ndarray
    supply: np.ndarray
    issuance: np.ndarray
    fees_usd: np.ndarray
    block_rewards_usd: np.ndarray
    volume_usd: np.ndarray
    active_addresses: np.ndarray
    tx_count: np.ndarray
    transfer_count: np.ndarray
    supply_active_1y: np.ndarray
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        n = len(self.price_usd)
        for name in MARKET_FIELDS:
            # Copy so the stored column cannot alias (or freeze) caller arrays.
            arr = np.array(getattr(self, name), dtype=np.float64)
            if len(arr) != n:
                raise ValueError(f"column {name!r} length mismatch")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.price_usd)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarketDataset):
            return NotImplemented
        return (
            self.start == other.start
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in MARKET_FIELDS
            )
        )

    def __hash__(self):
        return hash((self.start, len(self)))

    @property
    def end(self) -> dt.date:
        return self.start + dt.timedelta(days=len(self) - 1)

    @property
    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=i) for i in range(len(self))]

    def column(self, name: str) -> np.ndarray:
        if name not in MARKET_FIELDS:
            raise KeyError(name)
        return getattr(self, name)

    def index_of(self, day: dt.date) -> int:
        i = (day - self.start).days
        if not 0 <= i < len(self):
            raise RangeOutOfBounds(
                f"{day.isoformat()} outside dataset range "
                f"{self.start.isoformat()}..{self.end.isoformat()}"
            )
        return i

    def slice(self, start: dt.date, end: dt.date) -> "MarketDataset":
        """Rows restricted to [start, end]; both bounds must lie in range."""
        if start > end:
            raise RangeOutOfBounds(f"start {start.isoformat()} after end {end.isoformat()}")
        i = self.index_of(start)
        j = self.index_of(end)
        cols = {f: getattr(self, f)[i : j + 1].copy() for f in MARKET_FIELDS}
        return MarketDataset(start=start, flags=self.flags, **cols)

    def to_csv(self) -> str:
        """Canonical CSV; float cells use repr so parsing restores them exactly."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("date",) + MARKET_FIELDS)
        columns = [getattr(self, f) for f in MARKET_FIELDS]
        for i, day in enumerate(self.dates):
            writer.writerow([day.isoformat()] + [repr(float(col[i])) for col in columns])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _facts_grid(tables: list[RawTable]) -> tuple[dt.date, int, dict[str, np.ndarray]]:
    """Inner-join the tables onto the contiguous daily grid of their overlap."""
    if not tables:
        raise EmptyOverlap("no input tables")
    if any(t.n_rows == 0 for t in tables):
        raise EmptyOverlap("an input table is empty")
    start = max(t.dates[0] for t in tables)
    end = min(t.dates[-1] for t in tables)
    if start > end:
        raise EmptyOverlap(
            f"tables do not overlap ({start.isoformat()} > {end.isoformat()})"
        )
    n = (end - start).days + 1
    base = start.toordinal()

    grid: dict[str, np.ndarray] = {}
    for table in tables:
        offsets = np.array([d.toordinal() - base for d in table.dates])
        inside = (offsets >= 0) & (offsets < n)
        for name, cells in table.columns.items():
            if name in grid:
                # First table providing a column owns it; later duplicates are
                # ignored so one source of truth survives the merge.
                continue
            col = np.full(n, np.nan)
            vals = np.array(
                [np.nan if v is None else v for v in cells], dtype=np.float64
            )
            col[offsets[inside]] = vals[inside]
            grid[name] = col
    return start, n, grid


def _fill_column(name: str, col: np.ndarray, start: dt.date, policy: MissingPolicy) -> np.ndarray:
    missing = ~np.isfinite(col)
    if not missing.any():
        return col
    idx = np.flatnonzero(missing)
    # Identify runs of consecutive missing days.
    runs: list[tuple[int, int]] = []
    run_start = idx[0]
    prev = idx[0]
    for i in idx[1:]:
        if i != prev + 1:
            runs.append((run_start, prev - run_start + 1))
            run_start = i
        prev = i
    runs.append((run_start, prev - run_start + 1))

    for pos, length in runs:
        day = start + dt.timedelta(days=int(pos))
        if policy.mode == "reject" or pos == 0 or length > policy.max_gap:
            raise UnfilledGap(name, day, length)
        col[pos : pos + length] = col[pos - 1]
    return col


def build_dataset(
    tables: list[RawTable], policy: MissingPolicy | None = None
) -> MarketDataset:
    """Merge parsed source tables into a validated :class:`MarketDataset`.

    Tables are inner-joined on date over the overlap of their ranges; days a
    source skips inside the overlap surface as missing cells and are filled
    per ``policy``.  ``volume_usd`` is the sum of the on-chain and off-chain
    volume columns when both are present; with only one of them the dataset
    carries a degradation flag instead of failing.
    """
    policy = policy or MissingPolicy()
    start, n, grid = _facts_grid(tables)

    flags: list[str] = []
    if "volume_usd" not in grid:
        has_on = "volume_onchain_usd" in grid
        has_off = "volume_offchain_usd" in grid
        if has_on and has_off:
            on = _fill_column("volume_onchain_usd", grid.pop("volume_onchain_usd"), start, policy)
            off = _fill_column("volume_offchain_usd", grid.pop("volume_offchain_usd"), start, policy)
            grid["volume_usd"] = on + off
        elif has_on:
            grid["volume_usd"] = grid.pop("volume_onchain_usd")
            flags.append("volume_usd: off-chain volume not mapped; on-chain only")
        elif has_off:
            grid["volume_usd"] = grid.pop("volume_offchain_usd")
            flags.append("volume_usd: on-chain volume not mapped; off-chain only")
    grid.pop("volume_onchain_usd", None)
    grid.pop("volume_offchain_usd", None)

    columns = {}
    for name in MARKET_FIELDS:
        if name not in grid:
            # A wholly absent column is an unfillable gap spanning the range.
            raise UnfilledGap(name, start, n)
        columns[name] = _fill_column(name, grid[name], start, policy)

    ds = MarketDataset(start=start, flags=tuple(flags), **columns)
    validate(ds)
    return ds


_RANGE_CHECKS = (
    # (field, predicate over array, human message)
    ("price_usd", lambda a: a > 0, "must be > 0"),
    ("market_cap_usd", lambda a: a > 0, "must be > 0"),
    ("supply", lambda a: a > 0, "must be > 0"),
    ("issuance", lambda a: a >= 0, "must be >= 0"),
    ("fees_usd", lambda a: a >= 0, "must be >= 0"),
    ("block_rewards_usd", lambda a: a >= 0, "must be >= 0"),
    ("volume_usd", lambda a: a >= 0, "must be >= 0"),
    ("active_addresses", lambda a: a >= 0, "must be >= 0"),
    ("tx_count", lambda a: a >= 0, "must be >= 0"),
    ("transfer_count", lambda a: a >= 0, "must be >= 0"),
    ("supply_active_1y", lambda a: a >= 0, "must be >= 0"),
)


def validate(ds: MarketDataset) -> None:
    """Check every MarketDataset invariant; raise InvariantViolation on the first failure.

    Exposed separately so emitted datasets can be re-checked independently of
    construction.
    """

    def first_bad(mask: np.ndarray) -> int:
        return int(np.flatnonzero(mask)[0])

    for name, pred, msg in _RANGE_CHECKS:
        arr = getattr(ds, name)
        finite = np.isfinite(arr)
        if not finite.all():
            i = first_bad(~finite)
            raise InvariantViolation(i, ds.start + dt.timedelta(days=i), name, "non-finite value")
        ok = pred(arr)
        if not ok.all():
            i = first_bad(~ok)
            raise InvariantViolation(i, ds.start + dt.timedelta(days=i), name, msg)

    dsupply = np.diff(ds.supply)
    if (dsupply < 0).any():
        i = first_bad(np.concatenate(([False], dsupply < 0)))
        raise InvariantViolation(
            i, ds.start + dt.timedelta(days=i), "supply", "must be non-decreasing"
        )

    over = ds.supply_active_1y > ds.supply
    if over.any():
        i = first_bad(over)
        raise InvariantViolation(
            i, ds.start + dt.timedelta(days=i), "supply_active_1y", "exceeds supply"
        )


def read_market_csv(text: str) -> MarketDataset:
    """Parse a canonical-format CSV (the exact to_csv schema) back into a dataset."""
    table = parse_csv(text, schema={name: name for name in ("date",) + MARKET_FIELDS})
    return build_dataset([table], MissingPolicy(mode="reject"))


def load_market_csv(path, schema: dict[str, str] | None = None,
                    policy: MissingPolicy | None = None) -> MarketDataset:
    with open(path, "r", encoding="utf-8") as fh:
        table = parse_csv(fh.read(), schema=schema, source=str(path))
    return build_dataset([table], policy)
