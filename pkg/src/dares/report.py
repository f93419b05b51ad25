"""Run report serialization.

The report is the audit trail of every autonomous decision a run made. Two
runs with identical inputs and seed must produce byte-identical report files
except for the wall-clock block, so: keys are sorted, all timing data lives
under the single top-level key "timings", and nothing host-specific (thread
count, locale, absolute times) is recorded.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

TIMINGS_KEY = "timings"


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _plain(value):
    """Recursively convert numpy scalars/arrays so json никогда sees them."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    return value


def render_report(report: dict) -> str:
    text = json.dumps(_plain(report), sort_keys=True, indent=2, allow_nan=False)
    return text + "\n"


def write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_report(report))


def masked_report_text(text: str) -> str:
    """Report text with the timings block normalized, for byte comparisons."""
    data = json.loads(text)
    data[TIMINGS_KEY] = "masked"
    return json.dumps(data, sort_keys=True, indent=2)
