from typing import Optional


# ------------------------
# Error Hierarchy
# ------------------------
class RiqError(Exception):
    """Base class for every error raised by the riq package."""


class ConfigError(RiqError):
    """Invalid configuration value."""


class MalformedLine(RiqError):
    """An N-Quads statement that could not be parsed."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DatasetFetchError(RiqError):
    """A dataset source could not be opened or downloaded."""

    def __init__(self, source: str, detail: str, status: Optional[int] = None):
        super().__init__(f"{source}: {detail}")
        self.source = source
        self.status = status


class ParamMismatch(RiqError):
    """Two filters or signatures built with different parameters were compared."""


class CorruptIndex(RiqError):
    """Index files are missing, truncated or fail their checksum."""

    def __init__(self, detail: str):
        super().__init__(f"corrupt index: {detail}")
        self.detail = detail


class VersionMismatch(RiqError):
    """Index was written by an incompatible format version or fingerprint polynomial."""

    def __init__(self, found, expected, what: str = "index format version"):
        super().__init__(f"{what} {found}, expected {expected}")
        self.found = found
        self.expected = expected


class SparqlSyntaxError(RiqError):
    """Query text outside the supported grammar."""

    def __init__(self, line: int, col: int, expected: str, found: str, text: str = ""):
        super().__init__(f"line {line}, col {col}: expected {expected}, found {found}")
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        self.text = text

    def caret(self) -> str:
        """Render the offending source line with a caret under the column."""
        lines = self.text.splitlines()
        if not 1 <= self.line <= len(lines):
            return str(self)
        source_line = lines[self.line - 1]
        return f"{source_line}\n{' ' * (self.col - 1)}^\n{self}"


class DegenerateQuery(RiqError):
    """Rewriting pruned every mandatory part of a query."""


class UnsupportedExpression(RiqError):
    """A FILTER expression outside the supported predicate language."""
