"""Exception types shared across the package."""

from __future__ import annotations


class TSVFError(Exception):
    """Base class for errors raised by tsvf_lab."""


class StructuralError(TSVFError, ValueError):
    """Mismatched spaces, absent factors, unknown labels and similar misuse."""


class InvalidCircuit(TSVFError, ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid circuit:\n  " + "\n  ".join(self.diagnostics))


class ImpossiblePostSelection(TSVFError):
    """The post-selected state is orthogonal to the forward-evolving state.

    Both states are kept on the exception so callers can inspect them.
    """

    def __init__(self, forward=None, backward=None, message="impossible post-selection"):
        self.forward = forward
        self.backward = backward
        super().__init__(message)
