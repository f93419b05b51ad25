"""Parsing and emitting the YAML surface form of DsDL.

The parser is strict: unknown keys, duplicate keys, nested structures where
scalars are expected, and unknown type names are all errors with 1-based
line/column locations. ``lax=True`` downgrades unknown keys to warnings so
files using future DsDL sections still load.

Parsing never raises for bad input; every failure becomes a Diagnostic.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

import yaml
from yaml.nodes import MappingNode, Node, ScalarNode, SequenceNode

from . import diagnostics as dg
from .diagnostics import Diagnostic
from .schema import (
    FEATURE_TYPE_NAMES,
    ColumnRef,
    DsdlSchema,
    FeatureDecl,
    FeatureType,
    LabelDecl,
    validate_schema,
)

ROOT_KEY = "DsDL"
_SECTION_KEYS = ("features", "user_id", "item_id", "timestamp", "label")

# YAML null spellings: a plain scalar written this way means "no value", so a
# name spelled like one must be quoted to survive a round trip.
_NULL_SPELLINGS = frozenset({"", "~", "null", "Null", "NULL"})


@dataclass
class ParseResult:
    schema: Optional[DsdlSchema]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.schema is not None and not dg.has_errors(self.diagnostics)


def _loc(node: Node) -> tuple[int, int]:
    return node.start_mark.line + 1, node.start_mark.column + 1


class _Walker:
    """Single-pass structural walk over the composed YAML node tree."""

    def __init__(self, lax: bool):
        self.lax = lax
        self.diags: list[Diagnostic] = []
        # position path (e.g. "features[2]") -> location of the declared name
        self.name_locs: dict[str, tuple[int, int]] = {}

    def error(self, code: str, message: str, node: Node | None = None) -> None:
        line, col = _loc(node) if node is not None else (None, None)
        self.diags.append(dg.error(code, message, line, col))

    def unknown_key(self, key: str, where: str, node: Node) -> None:
        line, col = _loc(node)
        make = dg.warning if self.lax else dg.error
        self.diags.append(make(dg.UNKNOWN_KEY, f"unknown key {key!r} in {where}", line, col))

    def pairs(self, node: MappingNode, where: str) -> dict[str, Node]:
        """Mapping entries keyed by scalar key text, rejecting duplicates."""
        out: dict[str, Node] = {}
        for key_node, value_node in node.value:
            if not isinstance(key_node, ScalarNode):
                self.error(dg.MALFORMED_DOCUMENT, f"non-scalar key in {where}", key_node)
                continue
            key = key_node.value
            if key in out:
                line, col = _loc(key_node)
                self.diags.append(dg.error(dg.DUPLICATE_KEY, f"duplicate key {key!r} in {where}", line, col))
                continue
            out[key] = value_node
        return out

    def scalar(self, node: Node, where: str) -> Optional[str]:
        """The raw text of a scalar value; null-tagged scalars become ''."""
        if not isinstance(node, ScalarNode):
            self.error(dg.MALFORMED_DOCUMENT, f"{where} must be a scalar value", node)
            return None
        if node.tag == "tag:yaml.org,2002:null":
            return ""
        return node.value

    def feature_type(self, node: Node, where: str) -> Optional[FeatureType]:
        raw = self.scalar(node, where)
        if raw is None:
            return None
        if raw not in FEATURE_TYPE_NAMES:
            line, col = _loc(node)
            self.diags.append(
                dg.error(
                    dg.TYPE_UNKNOWN,
                    f"unknown type {raw!r} (expected one of: {', '.join(FEATURE_TYPE_NAMES)})",
                    line,
                    col,
                )
            )
            return None
        return FeatureType(raw)

    def named_entry(
        self, node: Node, where: str, name_key: str, pos_path: str
    ) -> Optional[tuple[str, FeatureType]]:
        """A ``{ col_name: x, type: t }`` or ``{ name: x, type: t }`` entry."""
        if not isinstance(node, MappingNode):
            self.error(dg.MALFORMED_DOCUMENT, f"{where} must be a mapping of scalars", node)
            return None
        entries = self.pairs(node, where)
        for key in entries:
            if key not in (name_key, "type"):
                self.unknown_key(key, where, entries[key])
        ok = True
        name: Optional[str] = None
        if name_key not in entries:
            self.error(dg.MISSING_KEY, f"{where} is missing required key {name_key!r}", node)
            ok = False
        else:
            name = self.scalar(entries[name_key], f"{where}.{name_key}")
            if name is None:
                ok = False
            else:
                self.name_locs[pos_path] = _loc(entries[name_key])
        ftype: Optional[FeatureType] = None
        if "type" not in entries:
            self.error(dg.MISSING_KEY, f"{where} is missing required key 'type'", node)
            ok = False
        else:
            ftype = self.feature_type(entries["type"], f"{where}.type")
            ok = ok and ftype is not None
        if not ok:
            return None
        assert name is not None and ftype is not None
        return name, ftype

    def column_ref(self, node: Node, key: str) -> Optional[ColumnRef]:
        if not isinstance(node, MappingNode):
            self.error(dg.MALFORMED_DOCUMENT, f"{key} must be a mapping with a col_name key", node)
            return None
        entries = self.pairs(node, key)
        for k in entries:
            if k != "col_name":
                self.unknown_key(k, key, entries[k])
        if "col_name" not in entries:
            self.error(dg.MISSING_KEY, f"{key} is missing required key 'col_name'", node)
            return None
        name = self.scalar(entries["col_name"], f"{key}.col_name")
        if name is None:
            return None
        self.name_locs[key] = _loc(entries["col_name"])
        return ColumnRef(name)


def parse_dsdl(source: str | bytes, lax: bool = False) -> ParseResult:
    """Parse DsDL YAML text into a validated schema.

    Accepts ``str`` or raw bytes (which must decode as UTF-8). On success the
    returned schema satisfies every structural invariant; otherwise
    ``schema`` is ``None`` and ``diagnostics`` holds every problem found.
    """
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            return ParseResult(None, [dg.error(dg.NOT_UTF8, f"input is not valid UTF-8: {exc.reason}")])

    try:
        root = yaml.compose(source)
    except yaml.YAMLError as exc:
        line = col = None
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            line, col = mark.line + 1, mark.column + 1
        problem = getattr(exc, "problem", None) or str(exc)
        return ParseResult(None, [dg.error(dg.MALFORMED_DOCUMENT, f"not parseable as YAML: {problem}", line, col)])

    if root is None:
        return ParseResult(None, [dg.error(dg.MISSING_ROOT, f"document has no {ROOT_KEY!r} root mapping", 1, 1)])
    if not isinstance(root, MappingNode):
        return ParseResult(
            None, [dg.error(dg.MALFORMED_DOCUMENT, "top level must be a mapping", *(_loc(root)))]
        )

    w = _Walker(lax)
    top = w.pairs(root, "the document root")
    for key, node in top.items():
        if key != ROOT_KEY:
            w.unknown_key(key, "the document root", node)
    if ROOT_KEY not in top:
        w.diags.append(dg.error(dg.MISSING_ROOT, f"document has no {ROOT_KEY!r} root mapping", *(_loc(root))))
        return ParseResult(None, w.diags)

    dsdl_node = top[ROOT_KEY]
    if not isinstance(dsdl_node, MappingNode):
        w.error(dg.MALFORMED_DOCUMENT, f"{ROOT_KEY} must be a mapping", dsdl_node)
        return ParseResult(None, w.diags)

    sections = w.pairs(dsdl_node, ROOT_KEY)
    for key, node in sections.items():
        if key not in _SECTION_KEYS:
            w.unknown_key(key, ROOT_KEY, node)

    features: list[FeatureDecl] = []
    if "features" not in sections:
        w.diags.append(
            dg.error(dg.MISSING_KEY, f"{ROOT_KEY} is missing required key 'features'", *(_loc(dsdl_node)))
        )
    else:
        feat_node = sections["features"]
        if not isinstance(feat_node, SequenceNode):
            w.error(dg.MALFORMED_DOCUMENT, "features must be a list of feature entries", feat_node)
        else:
            for i, entry in enumerate(feat_node.value):
                parsed = w.named_entry(entry, f"features[{i}]", "col_name", f"features[{i}]")
                if parsed is not None:
                    features.append(FeatureDecl(parsed[0], parsed[1]))

    refs: dict[str, Optional[ColumnRef]] = {"user_id": None, "item_id": None, "timestamp": None}
    for key in ("user_id", "item_id", "timestamp"):
        if key in sections:
            refs[key] = w.column_ref(sections[key], key)

    labels: list[LabelDecl] = []
    if "label" in sections:
        label_node = sections["label"]
        if not isinstance(label_node, SequenceNode):
            w.error(dg.MALFORMED_DOCUMENT, "label must be a list of label entries", label_node)
        else:
            for i, entry in enumerate(label_node.value):
                parsed = w.named_entry(entry, f"label[{i}]", "name", f"label[{i}]")
                if parsed is not None:
                    labels.append(LabelDecl(parsed[0], parsed[1]))

    if dg.has_errors(w.diags):
        return ParseResult(None, w.diags)

    candidate = DsdlSchema(
        features=tuple(features),
        user_id=refs["user_id"],
        item_id=refs["item_id"],
        timestamp=refs["timestamp"],
        labels=tuple(labels),
    )
    schema, violations = validate_schema(candidate)
    for v in violations:
        line, col = w.name_locs.get(v.position or "", _loc(dsdl_node))
        w.diags.append(dg.error(v.code, v.message, line, col))
    if schema is None:
        return ParseResult(None, w.diags)
    return ParseResult(schema, w.diags)


_PLAIN_SCALAR = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.\-]*")


def _quote(s: str) -> str:
    if _PLAIN_SCALAR.fullmatch(s) and s not in _NULL_SPELLINGS:
        return s
    return json.dumps(s, ensure_ascii=False)


def emit_dsdl(schema: DsdlSchema) -> str:
    """Render a schema back to DsDL YAML.

    The output uses the canonical key order (features, user_id, item_id,
    timestamp, label) and re-parses to a schema equal to the input.
    """
    lines = [f"{ROOT_KEY}:", "  features: ["]
    for i, f in enumerate(schema.features):
        comma = "," if i + 1 < len(schema.features) else ""
        lines.append(f"    {{ col_name: {_quote(f.col_name)}, type: {f.type.value} }}{comma}")
    lines.append("  ]")
    for key, ref in (("user_id", schema.user_id), ("item_id", schema.item_id), ("timestamp", schema.timestamp)):
        if ref is not None:
            lines.append(f"  {key}: {{ col_name: {_quote(ref.col_name)} }}")
    if schema.labels:
        lines.append("  label: [")
        for i, l in enumerate(schema.labels):
            comma = "," if i + 1 < len(schema.labels) else ""
            lines.append(f"    {{ name: {_quote(l.name)}, type: {l.type.value} }}{comma}")
        lines.append("  ]")
    return "\n".join(lines) + "\n"
