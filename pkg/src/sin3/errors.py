"""Exception hierarchy shared by all modules.

Every error carries the process exit code the CLI maps it to, so command
implementations can stay oblivious to exit-code policy.
"""

from __future__ import annotations


class Sin3Error(Exception):
    """Base class; generic runtime failures exit with code 1."""

    exit_code = 1


class ParseError(Sin3Error):
    """Malformed input text (SPARQL, Turtle, N-Triples, or N3)."""

    exit_code = 2

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(message + where)


class ValidationError(Sin3Error):
    """Well-formed input that violates a semantic precondition."""

    exit_code = 2


class UnsupportedFeatureError(Sin3Error):
    """Recognized but deliberately unsupported construct."""

    exit_code = 3

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(message + where)


class UnstratifiableError(Sin3Error):
    """Ruleset has a negation dependency cycle."""

    exit_code = 4


class CapExceededError(Sin3Error):
    """An iteration or expansion budget ran out before a fixpoint."""

    exit_code = 5
