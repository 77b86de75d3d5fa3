"""Shared error types for file parsing across the map, shape, plan and
G-code formats."""

from __future__ import annotations


class ParseError(ValueError):
    """A document failed to parse. Carries the 1-based source line (0 when
    the failure is structural rather than positional) and a reason."""

    def __init__(self, line: int, reason: str):
        self.line = int(line)
        self.reason = str(reason)
        super().__init__(f"line {self.line}: {self.reason}")
