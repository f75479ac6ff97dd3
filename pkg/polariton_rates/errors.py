"""Exceptions raised by polariton-rates."""

from __future__ import annotations

from typing import Optional


class ConfigError(ValueError):
    """An invalid run configuration.

    The message is anchored to the offending line when it is known.
    """

    def __init__(
        self, msg: str, filename: str = "<unknown>", lineno: Optional[int] = None
    ) -> None:
        self.msg = msg
        self.filename = filename
        self.lineno = lineno
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.lineno is None:
            return f"{self.filename}:{self.msg}"
        return f"{self.filename}:{self.lineno}:{self.msg}"


class ConvergenceError(RuntimeError):
    """An eigensolver did not converge."""
