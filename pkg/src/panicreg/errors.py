"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class PanicRegError(Exception):
    code = "panicreg-error"

    def __str__(self):
        msg = super().__str__()
        return f"[{self.code}] {msg}" if msg else self.code


class InputError(PanicRegError, ValueError):
    """Malformed or family-incompatible input data."""

    code = "invalid-input"


class DomainError(PanicRegError, ArithmeticError):
    """A loss or mean evaluation left the representable range."""

    code = "domain-error"


class PathInversionError(PanicRegError):
    code = "path-inversion-failed"


class UnboundedERMError(PanicRegError):
    code = "unbounded-erm"


class DegenerateGridError(PanicRegError):
    code = "degenerate-grid"


class SelectionError(PanicRegError):
    code = "selection-failed"


class BudgetExceededError(PanicRegError):
    code = "failure-budget-exceeded"
