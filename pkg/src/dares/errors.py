"""Exceptions raised by the training and evaluation half of the pipeline.

Each carries a stable ``code`` matching the diagnostic vocabulary so the CLI
can render them uniformly.
"""

from __future__ import annotations


class DaresError(Exception):
    """Base for all pipeline errors with a stable code."""

    code = "Internal"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class NoUsableFeatures(DaresError):
    code = "NoUsableFeatures"


class SchemaMismatch(DaresError):
    code = "SchemaMismatch"


class AllLabelsMissing(DaresError):
    code = "AllLabelsMissing"


class SingleClassLabels(DaresError):
    code = "SingleClassLabels"


class NonFiniteLoss(DaresError):
    code = "NonFiniteLoss"


class EmptyInteractions(DaresError):
    code = "EmptyInteractions"


class TooFewRows(DaresError):
    code = "TooFewRows"


class NoCompatibleModel(DaresError):
    code = "NoCompatibleModel"


class EmptyTrials(DaresError):
    code = "EmptyTrials"


class LengthMismatch(DaresError):
    code = "LengthMismatch"


class EmptyInput(DaresError):
    code = "EmptyInput"


class AllTrialsFailed(DaresError):
    code = "AllTrialsFailed"
