"""Diagnostics shared by the parsers, checkers, and the linker."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True, order=True)
class Diagnostic:
    """A single problem report, anchored to a source position when known.

    `line` and `col` are 1-based; 0 means the position is unknown (checker
    diagnostics about whole declarations, linker diagnostics about files).
    """

    message: str
    line: int = 0
    col: int = 0
    source: str = ""

    def __str__(self) -> str:
        where = f"{self.source or '<input>'}:{self.line}:{self.col}" if self.line else (self.source or "<input>")
        return f"{where}: {self.message}"


@dataclass
class Diagnostics:
    """An ordered collection of Diagnostic records."""

    items: list[Diagnostic] = field(default_factory=list)

    def add(self, message: str, line: int = 0, col: int = 0, source: str = "") -> None:
        self.items.append(Diagnostic(message, line, col, source))

    def extend(self, other: "Diagnostics") -> None:
        self.items.extend(other.items)

    def __bool__(self) -> bool:
        return bool(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def messages(self) -> list[str]:
        return [d.message for d in self.items]

    def __str__(self) -> str:
        return "\n".join(str(d) for d in self.items)


class ParseError(Exception):
    """Raised by the parsers on malformed input; carries the diagnostic."""

    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


class LinkError(Exception):
    """Raised when a program cannot be assembled; carries all diagnostics."""

    def __init__(self, diagnostics: Diagnostics):
        super().__init__(str(diagnostics))
        self.diagnostics = diagnostics
