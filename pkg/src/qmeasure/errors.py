"""Exception hierarchy shared by all qmeasure modules.

Every error carries a short machine-readable ``code`` so the CLI can emit a
stable JSON error envelope.
"""

from __future__ import annotations


class QMeasureError(Exception):
    """Base class for domain errors raised by this package."""

    code = "error"


class ContractViolationError(QMeasureError):
    """An operation was called with arguments that break its contract."""

    code = "contract-violation"


class ConfigurationError(QMeasureError):
    """Invalid or missing configuration (model, circuit, run parameters)."""

    code = "configuration"


class WiringError(QMeasureError):
    """A circuit references a port or path label that does not exist."""

    code = "wiring"


class InputError(QMeasureError):
    """Invalid data input (traces, powers, events)."""

    code = "input"


class DegenerateDataError(QMeasureError):
    """Data too degenerate to analyze (zero spread, all samples rejected)."""

    code = "degenerate-data"


class ParseError(QMeasureError):
    """Malformed input file; carries line/column when known."""

    code = "parse"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column
