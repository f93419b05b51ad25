"""Diagnostics shared by the DsDL parser, the CSV loader, and the CLI.

Every failure in the front half of the pipeline is reported as a
``Diagnostic`` rather than an exception, so callers always get the complete
list of problems in one pass.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import TextIO

ERROR = "error"
WARNING = "warning"

# Stable diagnostic codes. These are part of the CLI contract (rendered as
# ``error[CODE] file:line:col: message``) and of the conformance corpus.
NOT_UTF8 = "NotUtf8"
MALFORMED_DOCUMENT = "MalformedDocument"
MISSING_ROOT = "MissingRoot"
MISSING_KEY = "MissingKey"
TYPE_UNKNOWN = "TypeUnknown"
UNKNOWN_KEY = "UnknownKey"
DUPLICATE_KEY = "DuplicateKey"
EMPTY_FEATURES = "EmptyFeatures"
DUPLICATE_NAME = "DuplicateName"
EMPTY_NAME = "EmptyName"
MISSING_LABEL_FOR_TASK = "MissingLabelForTask"
MISSING_USER_ITEM_IDS = "MissingUserItemIds"
MISSING_COLUMN = "MissingColumn"
CELL_PARSE_ERROR = "CellParseError"
RAGGED_ROW = "RaggedRow"
EMPTY_FILE = "EmptyFile"


@dataclass(frozen=True)
class Diagnostic:
    """A located problem report.

    ``line`` and ``col`` are 1-based positions in the source file; both are
    ``None`` for diagnostics that are not tied to a specific location.
    """

    severity: str
    code: str
    message: str
    line: int | None = None
    col: int | None = None

    def render(self, path: str | None = None) -> str:
        loc = ""
        if path:
            loc = path
            if self.line is not None:
                loc += f":{self.line}:{self.col if self.col is not None else 1}"
            loc += ": "
        return f"{self.severity}[{self.code}] {loc}{self.message}"


def error(code: str, message: str, line: int | None = None, col: int | None = None) -> Diagnostic:
    return Diagnostic(ERROR, code, message, line, col)


def warning(code: str, message: str, line: int | None = None, col: int | None = None) -> Diagnostic:
    return Diagnostic(WARNING, code, message, line, col)


def has_errors(diags: list[Diagnostic]) -> bool:
    return any(d.severity == ERROR for d in diags)


def print_diagnostics(diags: list[Diagnostic], path: str | None = None, out: TextIO = sys.stderr) -> None:
    for d in diags:
        print(d.render(path), file=out)
