"""Error types shared across the toolchain.

Everything user-facing derives from TmlError so the CLI can map the whole
family to a single exit code. TypingError groups the behavioural-type
derivation failures; the simulator raises RuntimeTypeError for rule-shape
violations that a well-typed program cannot produce.
"""

from __future__ import annotations


class TmlError(Exception):
    """Base class for user-facing errors."""


class ParseError(TmlError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class WellFormednessError(TmlError):
    pass


class UnboundVariable(TmlError):
    pass


class TypeMismatch(TmlError):
    pass


class DivisionByZero(TmlError):
    pass


class RuntimeTypeError(TmlError):
    """A reduction rule received a value of the wrong shape.

    On programs that pass the behavioural-type derivation this signals a bug
    in the type system itself, which is exactly what the differential check
    is designed to surface.
    """


class TypingError(TmlError):
    """Base class for behavioural-type derivation errors."""


class RestrictionViolation(TypingError):
    """Invocation on an object that is neither in the caller's cog nor in a
    cog created by the current method body."""


class UnknownMethod(TypingError):
    pass


class GetOnNonFuture(TypingError):
    pass


class ArityMismatch(TypingError):
    pass


class ReturnTypeMismatch(TypingError):
    pass


class MethodTypingErrors(TypingError):
    """Aggregate of per-method failures; the driver reports all of them."""

    def __init__(self, failures: list[tuple[str, TmlError]]):
        self.failures = failures
        lines = [f"{name}: {err}" for name, err in failures]
        super().__init__("; ".join(lines))


class NoApplicableEquation(TmlError):
    pass


class UndefinedSymbol(TmlError):
    pass


class UnboundDenominator(TmlError):
    def __init__(self, var: str, detail: str = ""):
        self.var = var
        msg = f"capacity variable {var!r} cannot be bound to a single constant"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
