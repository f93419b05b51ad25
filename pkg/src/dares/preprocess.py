"""Schema-driven preprocessing: Dataset -> dense feature matrix.

Everything is decided by declared column types, never by peeking at the
task label. ``fit_plan`` learns all statistics from training data and
freezes them in a PreprocessPlan; ``apply_plan`` then transforms any
dataset with the same schema using only those frozen statistics, so train
and test are guaranteed to go through identical transforms.

Per type:

* numeric   -- impute train mean, clip to mean +/- z*stddev (computed on the
               raw training column), then z-score with the post-clip stats
* binary    -- already 0/1 from ingest; impute the training mode
* categorical -- one-hot over the training vocabulary (sorted); unseen
               values encode as all zeros; a missing-indicator column is
               added iff the training column had missing cells
* ordinal   -- integer rank scaled to [0, 1]; ranks follow lexicographic
               order of the distinct training values, or numeric order when
               every distinct value parses as a number
* textual   -- hashed bag of words: lowercase, split on non-alphanumeric
               runs, 64-bit FNV-1a modulo hash_dim, counts L2-normalized
* url       -- always dropped (media is never fetched)

Columns that are constant or look like row identifiers are dropped. Label,
user_id, item_id, and timestamp columns are never feature inputs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataset import Dataset, TypedColumn
from .errors import AllLabelsMissing, NoUsableFeatures, SchemaMismatch
from .schema import DsdlSchema, FeatureType, LabelDecl, TaskKind, TaskSpec

DEFAULT_NOISE_Z = 4.0
DEFAULT_HASH_DIM = 1024

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_FNV_OFFSET = 14695981039346656037
_FNV_PRIME = 1099511628211
_U64 = 1 << 64


def fnv1a_64(token: str) -> int:
    """64-bit FNV-1a over the token's UTF-8 bytes. Fixed for all time:
    changing it would silently re-bucket every text feature."""
    h = _FNV_OFFSET
    for b in token.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) % _U64
    return h


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class PreprocessOptions:
    noise_z: float = DEFAULT_NOISE_Z
    hash_dim: int = DEFAULT_HASH_DIM
    drop_duplicate_rows: bool = False


@dataclass
class ColumnPlan:
    """Frozen per-column decision and statistics."""

    name: str
    ftype: FeatureType
    action: str  # "keep" | "drop"
    drop_reason: Optional[str] = None  # "constant" | "id-like" | "url-unfetched"
    # numeric
    clip_lo: Optional[float] = None
    clip_hi: Optional[float] = None
    mean: Optional[float] = None
    stddev: Optional[float] = None
    impute_value: Optional[float] = None
    # binary
    impute_mode: Optional[int] = None
    # categorical / ordinal
    vocabulary: Optional[list[str]] = None
    rank_map: Optional[dict[str, int]] = None
    impute_rank: Optional[int] = None
    had_missing: bool = False
    # textual
    hash_dim: Optional[int] = None

    def output_width(self) -> int:
        if self.action == "drop":
            return 0
        if self.ftype is FeatureType.CATEGORICAL:
            return len(self.vocabulary) + (1 if self.had_missing else 0)
        if self.ftype is FeatureType.TEXTUAL:
            return self.hash_dim
        return 1


@dataclass
class LabelPlan:
    decl: LabelDecl
    rank_map: Optional[dict[str, int]] = None  # ordinal labels only


@dataclass
class PreprocessPlan:
    schema: DsdlSchema
    options: PreprocessOptions
    columns: list[ColumnPlan]
    label: Optional[LabelPlan] = None

    def kept_columns(self) -> list[ColumnPlan]:
        return [c for c in self.columns if c.action == "keep"]

    def dropped_columns(self) -> list[ColumnPlan]:
        return [c for c in self.columns if c.action == "drop"]

    def to_json_dict(self) -> dict:
        cols = []
        for c in self.columns:
            entry: dict = {"column": c.name, "type": c.ftype.value, "action": c.action}
            if c.action == "drop":
                entry["reason"] = c.drop_reason
            else:
                if c.ftype is FeatureType.NUMERIC:
                    entry.update(
                        clip=[c.clip_lo, c.clip_hi], mean=c.mean, stddev=c.stddev, impute=c.impute_value
                    )
                elif c.ftype is FeatureType.BINARY:
                    entry["impute"] = c.impute_mode
                elif c.ftype is FeatureType.CATEGORICAL:
                    entry.update(vocabulary=c.vocabulary, missing_indicator=c.had_missing)
                elif c.ftype is FeatureType.ORDINAL:
                    entry.update(ranks=c.rank_map, impute_rank=c.impute_rank)
                elif c.ftype is FeatureType.TEXTUAL:
                    entry["hash_dim"] = c.hash_dim
            cols.append(entry)
        out = {
            "noise_z": self.options.noise_z,
            "hash_dim": self.options.hash_dim,
            "drop_duplicate_rows": self.options.drop_duplicate_rows,
            "columns": cols,
        }
        if self.label is not None:
            out["label"] = {"name": self.label.decl.name, "type": self.label.decl.type.value}
            if self.label.rank_map is not None:
                out["label"]["ranks"] = self.label.rank_map
        return out


@dataclass
class Provenance:
    source: str
    kind: str  # one-hot | zscore | ordinal | hash | missing-indicator | binary
    detail: Optional[str] = None


@dataclass
class FeatureMatrix:
    data: np.ndarray
    col_provenance: list[Provenance]
    kept_row_index: np.ndarray  # matrix row -> original dataset row


def _observed(col: TypedColumn) -> list:
    return [v for v, m in zip(col.values, col.missing) if not m]


def _ordinal_order(distinct: set[str]) -> list[str]:
    """Rank order for ordinal values: numeric when every value parses as a
    finite number (ties broken lexicographically), else lexicographic."""
    try:
        keyed = sorted(distinct, key=lambda v: (float(v), v))
        if all(np.isfinite(float(v)) for v in distinct):
            return keyed
    except ValueError:
        pass
    return sorted(distinct)


def _mode(values: list, order: list) -> object:
    """Most frequent value; ties resolved by position in ``order``."""
    counts: dict = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best = max(order, key=lambda v: (counts.get(v, 0), -order.index(v)))
    return best


def _fit_column(col: TypedColumn, row_count: int, options: PreprocessOptions) -> ColumnPlan:
    ftype = col.declared_type
    if ftype is FeatureType.URL:
        return ColumnPlan(col.name, ftype, "drop", "url-unfetched")

    observed = _observed(col)
    distinct = set(observed)
    if len(distinct) <= 1:
        return ColumnPlan(col.name, ftype, "drop", "constant")
    if ftype in (FeatureType.CATEGORICAL, FeatureType.TEXTUAL) and len(distinct) == row_count:
        return ColumnPlan(col.name, ftype, "drop", "id-like")

    had_missing = any(col.missing)
    plan = ColumnPlan(col.name, ftype, "keep", had_missing=had_missing)

    if ftype is FeatureType.NUMERIC:
        raw = np.asarray(observed, dtype=float)
        raw_mean = float(np.mean(raw))
        raw_std = float(np.std(raw))
        plan.clip_lo = raw_mean - options.noise_z * raw_std
        plan.clip_hi = raw_mean + options.noise_z * raw_std
        clipped = np.clip(raw, plan.clip_lo, plan.clip_hi)
        plan.mean = float(np.mean(clipped))
        plan.stddev = float(np.std(clipped))
        plan.impute_value = plan.mean
        if plan.stddev == 0.0:  # extreme clipping collapse; treat as constant
            return ColumnPlan(col.name, ftype, "drop", "constant")
    elif ftype is FeatureType.BINARY:
        ones = sum(observed)
        plan.impute_mode = 1 if ones > len(observed) - ones else 0
    elif ftype is FeatureType.CATEGORICAL:
        plan.vocabulary = sorted(distinct)
    elif ftype is FeatureType.ORDINAL:
        order = _ordinal_order(distinct)
        plan.rank_map = {v: i for i, v in enumerate(order)}
        plan.impute_rank = plan.rank_map[_mode(observed, order)]
    elif ftype is FeatureType.TEXTUAL:
        plan.hash_dim = options.hash_dim
    return plan


def fit_label_plan(train: Dataset, task: TaskSpec) -> Optional[LabelPlan]:
    """Fit the label encoding alone (ordinal labels need a training-time rank
    map). None for label-free tasks."""
    if task.label is None:
        return None
    label_plan = LabelPlan(task.label)
    if task.label.type is FeatureType.ORDINAL:
        col = train.columns[task.label.name]
        order = _ordinal_order(set(_observed(col)))
        label_plan.rank_map = {v: i for i, v in enumerate(order)}
    return label_plan


def fit_plan(train: Dataset, task: TaskSpec, options: PreprocessOptions = PreprocessOptions()) -> PreprocessPlan:
    """Fit all preprocessing statistics on training data.

    Raises NoUsableFeatures when every feature column is dropped.
    """
    columns = [_fit_column(train.columns[f.col_name], train.row_count, options) for f in train.schema.features]
    if not any(c.action == "keep" for c in columns):
        raise NoUsableFeatures("every feature column was dropped (constant, id-like, or url)")
    return PreprocessPlan(train.schema, options, columns, fit_label_plan(train, task))


def _duplicate_free_rows(data: Dataset) -> list[int]:
    """Indices of rows surviving exact-duplicate removal (first kept)."""
    names = data.schema.declared_names()
    cols = [data.columns[n] for n in names if n in data.columns]
    seen: set = set()
    kept = []
    for i in range(data.row_count):
        key = tuple((col.values[i], col.missing[i]) for col in cols)
        if key in seen:
            continue
        seen.add(key)
        kept.append(i)
    return kept


def _numeric_block(plan: ColumnPlan, col: TypedColumn, rows: list[int]) -> np.ndarray:
    x = np.array([plan.impute_value if col.missing[i] else col.values[i] for i in rows], dtype=float)
    x = np.clip(x, plan.clip_lo, plan.clip_hi)
    return ((x - plan.mean) / plan.stddev)[:, None]


def _binary_block(plan: ColumnPlan, col: TypedColumn, rows: list[int]) -> np.ndarray:
    x = np.array([plan.impute_mode if col.missing[i] else col.values[i] for i in rows], dtype=float)
    return x[:, None]


def _categorical_block(plan: ColumnPlan, col: TypedColumn, rows: list[int]) -> np.ndarray:
    vocab_pos = {v: j for j, v in enumerate(plan.vocabulary)}
    width = len(plan.vocabulary) + (1 if plan.had_missing else 0)
    block = np.zeros((len(rows), width))
    for r, i in enumerate(rows):
        if col.missing[i]:
            if plan.had_missing:
                block[r, -1] = 1.0
            continue
        j = vocab_pos.get(col.values[i])
        if j is not None:  # unseen categories stay all-zero
            block[r, j] = 1.0
    return block


def _ordinal_block(plan: ColumnPlan, col: TypedColumn, rows: list[int]) -> np.ndarray:
    k = len(plan.rank_map)
    scale = float(k - 1)
    ranks = np.empty(len(rows))
    for r, i in enumerate(rows):
        if col.missing[i]:
            ranks[r] = plan.impute_rank
        else:
            ranks[r] = plan.rank_map.get(col.values[i], plan.impute_rank)
    return (ranks / scale)[:, None]


def _textual_block(plan: ColumnPlan, col: TypedColumn, rows: list[int]) -> np.ndarray:
    dim = plan.hash_dim
    block = np.zeros((len(rows), dim))
    for r, i in enumerate(rows):
        if col.missing[i]:
            continue
        for token in tokenize(col.values[i]):
            block[r, fnv1a_64(token) % dim] += 1.0
        norm = np.linalg.norm(block[r])
        if norm > 0:
            block[r] /= norm
    return block


_BLOCK_BUILDERS = {
    FeatureType.NUMERIC: (_numeric_block, "zscore"),
    FeatureType.BINARY: (_binary_block, "binary"),
    FeatureType.CATEGORICAL: (_categorical_block, "one-hot"),
    FeatureType.ORDINAL: (_ordinal_block, "ordinal"),
    FeatureType.TEXTUAL: (_textual_block, "hash"),
}


def apply_plan(plan: PreprocessPlan, data: Dataset, drop_duplicate_rows: bool = False) -> FeatureMatrix:
    """Transform a dataset with frozen statistics.

    ``drop_duplicate_rows`` is only ever passed for the training matrix; test
    rows are never dropped so predictions stay aligned with input rows.
    """
    if data.schema != plan.schema:
        raise SchemaMismatch("dataset schema differs from the schema the plan was fitted on")

    rows = _duplicate_free_rows(data) if drop_duplicate_rows else list(range(data.row_count))

    blocks: list[np.ndarray] = []
    provenance: list[Provenance] = []
    for cplan in plan.kept_columns():
        builder, kind = _BLOCK_BUILDERS[cplan.ftype]
        block = builder(cplan, data.columns[cplan.name], rows)
        blocks.append(block)
        if cplan.ftype is FeatureType.CATEGORICAL:
            provenance.extend(Provenance(cplan.name, "one-hot", v) for v in cplan.vocabulary)
            if cplan.had_missing:
                provenance.append(Provenance(cplan.name, "missing-indicator"))
        elif cplan.ftype is FeatureType.TEXTUAL:
            provenance.extend(Provenance(cplan.name, "hash", str(j)) for j in range(cplan.hash_dim))
        else:
            provenance.append(Provenance(cplan.name, kind))

    data_matrix = np.hstack(blocks) if blocks else np.zeros((len(rows), 0))
    return FeatureMatrix(data_matrix, provenance, np.asarray(rows, dtype=int))


def label_vector(label_plan: LabelPlan, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Numeric label values plus a mask of rows without a usable label.

    Masked rows (missing, or an ordinal value never seen in training) must be
    excluded by the caller. Raises AllLabelsMissing when nothing is usable.
    """
    col = data.columns[label_plan.decl.name]
    n = len(col)
    values = np.zeros(n)
    mask = np.zeros(n, dtype=bool)
    for i in range(n):
        if col.missing[i]:
            mask[i] = True
            continue
        v = col.values[i]
        if label_plan.rank_map is not None:
            rank = label_plan.rank_map.get(v)
            if rank is None:
                mask[i] = True
                continue
            values[i] = float(rank)
        else:
            values[i] = float(v)
    if mask.all():
        raise AllLabelsMissing(f"label column {label_plan.decl.name!r} has no usable values")
    return values, mask
