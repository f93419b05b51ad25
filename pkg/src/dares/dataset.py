"""CSV loading: bind a raw table to a DsDL schema, cell by cell.

Dialect is fixed: comma separator, double-quote quoting with doubled-quote
escaping, mandatory header row, UTF-8. A cell is missing iff it is the empty
string or the literal ``NA``. Everything else must parse under the column's
declared type; any cell that does not is a loud CellParseError, never a
silent coercion.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional

from . import diagnostics as dg
from .diagnostics import Diagnostic
from .schema import DsdlSchema, FeatureType

MISSING_MARKERS = ("", "NA")

# Finite decimal only: NaN/inf spellings and underscores are parse errors.
_NUMERIC_RE = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_INTEGER_RE = re.compile(r"[+-]?\d+")
_RFC3339_RE = re.compile(
    r"(\d{4})-(\d{2})-(\d{2})[Tt]"
    r"(\d{2}):(\d{2}):(\d{2})(?:\.\d+)?"
    r"([Zz]|[+-]\d{2}:\d{2})"
)

_BINARY_VALUES = {"0": 0, "1": 1, "true": 1, "false": 0, "yes": 1, "no": 0}

_MAX_DIAGNOSTICS = 100


@dataclass
class TypedColumn:
    """One loaded column. ``values[i] is None`` exactly when ``missing[i]``.

    ``declared_type`` is None for the user_id/item_id/timestamp bindings,
    which carry no DsDL type: ids load as raw strings and timestamps as
    integer epoch seconds.
    """

    name: str
    role: str  # feature | label | user_id | item_id | timestamp
    declared_type: Optional[FeatureType]
    values: list
    missing: list[bool]

    def __len__(self) -> int:
        return len(self.values)

    def subset(self, indices) -> "TypedColumn":
        return TypedColumn(
            self.name,
            self.role,
            self.declared_type,
            [self.values[i] for i in indices],
            [self.missing[i] for i in indices],
        )


@dataclass
class Dataset:
    """An immutable columnar table bound to a DsDL schema."""

    schema: DsdlSchema
    row_count: int
    columns: dict[str, TypedColumn]
    ignored_columns: tuple[str, ...] = ()
    path: str = ""

    def subset(self, indices) -> "Dataset":
        return Dataset(
            schema=self.schema,
            row_count=len(indices),
            columns={name: col.subset(indices) for name, col in self.columns.items()},
            ignored_columns=self.ignored_columns,
            path=self.path,
        )

    def column(self, name: str) -> TypedColumn:
        return self.columns[name]


def _parse_timestamp(raw: str) -> Optional[int]:
    """Integer seconds, or epoch seconds of an RFC 3339 date-time (sub-second
    precision truncated). None when the text is neither."""
    if _INTEGER_RE.fullmatch(raw):
        return int(raw)
    m = _RFC3339_RE.fullmatch(raw)
    if not m:
        return None
    year, month, day, hour, minute, second = (int(m.group(i)) for i in range(1, 7))
    offset = m.group(7)
    if offset in ("Z", "z"):
        tz = timezone.utc
    else:
        sign = 1 if offset[0] == "+" else -1
        tz = timezone(sign * timedelta(hours=int(offset[1:3]), minutes=int(offset[4:6])))
    try:
        dt = datetime(year, month, day, hour, minute, second, tzinfo=tz)
    except ValueError:
        return None
    return int(dt.timestamp())


def _parse_cell(raw: str, role: str, ftype: Optional[FeatureType]):
    """Parsed value, or None when the text is invalid for this column."""
    if role in ("user_id", "item_id"):
        return raw
    if role == "timestamp":
        return _parse_timestamp(raw)
    assert ftype is not None
    if ftype is FeatureType.NUMERIC:
        if not _NUMERIC_RE.fullmatch(raw):
            return None
        value = float(raw)
        return value if math.isfinite(value) else None
    if ftype is FeatureType.BINARY:
        return _BINARY_VALUES.get(raw.lower())
    # categorical / ordinal / textual / url keep the raw string
    return raw


def _bound_columns(schema: DsdlSchema, require_labels: bool, header: list[str], diags: list[Diagnostic]):
    """Resolve every schema-declared column to a header index."""
    specs: list[tuple[str, str, Optional[FeatureType], bool]] = []
    for f in schema.features:
        specs.append((f.col_name, "feature", f.type, True))
    if schema.user_id:
        specs.append((schema.user_id.col_name, "user_id", None, True))
    if schema.item_id:
        specs.append((schema.item_id.col_name, "item_id", None, True))
    if schema.timestamp:
        specs.append((schema.timestamp.col_name, "timestamp", None, True))
    for l in schema.labels:
        specs.append((l.name, "label", l.type, require_labels))

    positions: dict[str, list[int]] = {}
    for i, name in enumerate(header):
        positions.setdefault(name, []).append(i)

    bound: list[tuple[str, str, Optional[FeatureType], int]] = []
    for name, role, ftype, required in specs:
        slots = positions.get(name, [])
        if not slots:
            if required:
                diags.append(dg.error(dg.MISSING_COLUMN, f"declared column {name!r} not found in CSV header"))
            continue
        if len(slots) > 1:
            diags.append(
                dg.error(dg.DUPLICATE_NAME, f"declared column {name!r} appears {len(slots)} times in CSV header")
            )
            continue
        bound.append((name, role, ftype, slots[0]))

    declared = {name for name, _, _, _ in specs}
    ignored = tuple(sorted({name for name in header if name not in declared}))
    return bound, ignored


def load_dataset(
    csv_path: str | Path,
    schema: DsdlSchema,
    require_labels: bool = True,
) -> tuple[Optional[Dataset], list[Diagnostic]]:
    """Load a CSV file under a valid schema.

    With ``require_labels=False`` (unlabeled test sets) label columns may be
    absent from the header; any label column that is present still loads.
    Columns in the CSV but not in the schema are ignored and reported.
    """
    diags: list[Diagnostic] = []
    path = str(csv_path)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        return None, [dg.error(dg.EMPTY_FILE, f"cannot open {path}: {exc.strerror}")]

    with fh:
        reader = csv.reader(fh)
        try:
            try:
                header = next(reader)
            except StopIteration:
                return None, [dg.error(dg.EMPTY_FILE, f"{path} has no header row")]

            bound, ignored = _bound_columns(schema, require_labels, header, diags)
            if dg.has_errors(diags):
                return None, diags

            store: dict[str, tuple[str, Optional[FeatureType], int, list, list[bool]]] = {
                name: (role, ftype, idx, [], []) for name, role, ftype, idx in bound
            }
            width = len(header)
            row_count = 0
            truncated = False
            for row in reader:
                line = reader.line_num
                if len(row) != width:
                    diags.append(
                        dg.error(dg.RAGGED_ROW, f"row {row_count + 1} has {len(row)} fields, header has {width}", line)
                    )
                    if len(diags) >= _MAX_DIAGNOSTICS:
                        truncated = True
                        break
                    continue
                row_count += 1
                for name, (role, ftype, idx, values, missing) in store.items():
                    raw = row[idx]
                    if raw in MISSING_MARKERS:
                        values.append(None)
                        missing.append(True)
                        continue
                    parsed = _parse_cell(raw, role, ftype)
                    if parsed is None:
                        diags.append(
                            dg.error(
                                dg.CELL_PARSE_ERROR,
                                f"column {name!r}, row {row_count}: cannot parse {raw!r} as "
                                f"{ftype.value if ftype else role}",
                                line,
                                idx + 1,
                            )
                        )
                        if len(diags) >= _MAX_DIAGNOSTICS:
                            truncated = True
                        parsed = None  # keep column lengths aligned
                        values.append(None)
                        missing.append(True)
                    else:
                        values.append(parsed)
                        missing.append(False)
                if truncated:
                    break
        except csv.Error as exc:
            return None, diags + [dg.error(dg.CELL_PARSE_ERROR, f"CSV structure error: {exc}", reader.line_num)]
        except UnicodeDecodeError as exc:
            return None, diags + [dg.error(dg.NOT_UTF8, f"{path} is not valid UTF-8: {exc.reason}")]

    if truncated:
        diags.append(dg.error(dg.CELL_PARSE_ERROR, f"stopped after {_MAX_DIAGNOSTICS} problems"))
    if dg.has_errors(diags):
        return None, diags

    columns = {
        name: TypedColumn(name, role, ftype, values, missing)
        for name, (role, ftype, idx, values, missing) in store.items()
    }
    return Dataset(schema=schema, row_count=row_count, columns=columns, ignored_columns=ignored, path=path), diags
