"""The DsDL abstract model: dataset descriptions and their invariants.

A DsDL file declares the columns of a tabular dataset: a mandatory list of
typed features, optional ``user_id`` / ``item_id`` / ``timestamp`` column
bindings, and an optional list of typed labels. This module holds the parsed
representation independent of the YAML surface form, plus structural
validation and task compatibility checks.

Name comparison is case-sensitive and byte-wise throughout: CSV headers are
matched exactly, so no normalization is ever applied to declared names.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .diagnostics import (
    DUPLICATE_NAME,
    EMPTY_FEATURES,
    EMPTY_NAME,
    MISSING_LABEL_FOR_TASK,
    MISSING_USER_ITEM_IDS,
)


class FeatureType(Enum):
    """The six legal column types a DsDL file can declare."""

    CATEGORICAL = "categorical"
    ORDINAL = "ordinal"
    NUMERIC = "numeric"
    BINARY = "binary"
    TEXTUAL = "textual"
    URL = "url"


FEATURE_TYPE_NAMES = tuple(t.value for t in FeatureType)


@dataclass(frozen=True)
class FeatureDecl:
    col_name: str
    type: FeatureType


@dataclass(frozen=True)
class LabelDecl:
    # Labels use ``name`` where features use ``col_name``; the DsDL grammar
    # distinguishes the two keys and we follow it literally.
    name: str
    type: FeatureType


@dataclass(frozen=True)
class ColumnRef:
    col_name: str


@dataclass(frozen=True)
class DsdlSchema:
    """A parsed DsDL description. May be structurally invalid until passed
    through :func:`validate_schema`."""

    features: tuple[FeatureDecl, ...]
    user_id: Optional[ColumnRef] = None
    item_id: Optional[ColumnRef] = None
    timestamp: Optional[ColumnRef] = None
    labels: tuple[LabelDecl, ...] = ()

    def declared_names(self) -> list[str]:
        """All column names the schema binds, in declaration order."""
        names = [f.col_name for f in self.features]
        for ref in (self.user_id, self.item_id, self.timestamp):
            if ref is not None:
                names.append(ref.col_name)
        names.extend(l.name for l in self.labels)
        return names

    def label_names(self) -> set[str]:
        return {l.name for l in self.labels}

    def feature_names(self) -> set[str]:
        return {f.col_name for f in self.features}


@dataclass(frozen=True)
class SchemaViolation:
    """A structural invariant violation, independent of source location.

    ``subject`` names the offending column where applicable; ``position`` is a
    human-readable path such as ``features[2]`` for violations tied to a
    declaration slot.
    """

    code: str
    message: str
    subject: str | None = None
    position: str | None = None


def validate_schema(candidate: DsdlSchema) -> tuple[Optional[DsdlSchema], list[SchemaViolation]]:
    """Check every structural invariant of a DsDL schema.

    Returns ``(schema, [])`` when valid, or ``(None, violations)`` with the
    complete list of violations, never just the first.
    """
    violations: list[SchemaViolation] = []

    if len(candidate.features) == 0:
        violations.append(
            SchemaViolation(EMPTY_FEATURES, "a DsDL must declare at least one feature", position="features")
        )

    named: list[tuple[str, str]] = [(f.col_name, f"features[{i}]") for i, f in enumerate(candidate.features)]
    for key, ref in (("user_id", candidate.user_id), ("item_id", candidate.item_id), ("timestamp", candidate.timestamp)):
        if ref is not None:
            named.append((ref.col_name, key))
    named.extend((l.name, f"label[{i}]") for i, l in enumerate(candidate.labels))

    for name, pos in named:
        if name.strip() == "":
            violations.append(
                SchemaViolation(EMPTY_NAME, f"{pos}: column name is empty", subject=name, position=pos)
            )

    seen: dict[str, str] = {}
    reported: set[str] = set()
    for name, pos in named:
        if name in seen and name not in reported:
            violations.append(
                SchemaViolation(
                    DUPLICATE_NAME,
                    f"name {name!r} declared at both {seen[name]} and {pos}",
                    subject=name,
                    position=pos,
                )
            )
            reported.add(name)
        else:
            seen.setdefault(name, pos)

    if violations:
        return None, violations
    return candidate, []


class TaskKind(Enum):
    CTR = "ctr"
    RATING = "rating"
    TOP_N = "top_n"


# Label types each task can learn from.
_TASK_LABEL_TYPES = {
    TaskKind.CTR: (FeatureType.BINARY,),
    TaskKind.RATING: (FeatureType.NUMERIC, FeatureType.ORDINAL),
}


@dataclass(frozen=True)
class TaskSpec:
    """A task resolved against a schema: which columns play which role."""

    task: TaskKind
    label: Optional[LabelDecl] = None
    user_col: Optional[str] = None
    item_col: Optional[str] = None
    timestamp_col: Optional[str] = None


def task_compatibility(
    schema: DsdlSchema,
    task: TaskKind,
    label_override: str | None = None,
) -> tuple[Optional[TaskSpec], list[SchemaViolation]]:
    """Resolve a task against a valid schema.

    ctr needs a binary label, rating a numeric or ordinal label, top_n both
    user_id and item_id bindings. When several labels match, the first in
    declaration order wins unless ``label_override`` names another one.
    """
    user_col = schema.user_id.col_name if schema.user_id else None
    item_col = schema.item_id.col_name if schema.item_id else None
    ts_col = schema.timestamp.col_name if schema.timestamp else None

    if task is TaskKind.TOP_N:
        if user_col is None or item_col is None:
            missing = [k for k, v in (("user_id", user_col), ("item_id", item_col)) if v is None]
            return None, [
                SchemaViolation(
                    MISSING_USER_ITEM_IDS,
                    f"task top_n requires user_id and item_id bindings; missing: {', '.join(missing)}",
                )
            ]
        return TaskSpec(task, None, user_col, item_col, ts_col), []

    wanted = _TASK_LABEL_TYPES[task]
    candidates = [l for l in schema.labels if l.type in wanted]
    if label_override is not None:
        candidates = [l for l in candidates if l.name == label_override]
        if not candidates:
            return None, [
                SchemaViolation(
                    MISSING_LABEL_FOR_TASK,
                    f"label {label_override!r} is not declared with a type usable for task "
                    f"{task.value} (needs one of: {', '.join(t.value for t in wanted)})",
                )
            ]
    if not candidates:
        return None, [
            SchemaViolation(
                MISSING_LABEL_FOR_TASK,
                f"task {task.value} requires a label of type {' or '.join(t.value for t in wanted)}",
            )
        ]
    return TaskSpec(task, candidates[0], user_col, item_col, ts_col), []
