"""Exception hierarchy shared by all subsystems."""


class DvCheckError(Exception):
    pass


class ConfigurationError(DvCheckError, ValueError):
    """Inconsistent inputs: width mismatch, unknown field, bad file content."""


class ValidationError(DvCheckError):
    def __init__(self, message, overlaps=()):
        super().__init__(message)
        self.overlaps = list(overlaps)


class ReqLangSyntaxError(DvCheckError):
    def __init__(self, message, line=1, column=1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class BudgetExceeded(DvCheckError):
    pass


class NotConvertibleError(DvCheckError):
    """Raised when a requirement/topology product contains a cycle."""

    def __init__(self, message, cycle=()):
        super().__init__(message)
        self.cycle = list(cycle)


class ContractViolation(DvCheckError):
    """An operation was called outside its precondition (e.g. non-quiescent)."""


class DivergenceError(DvCheckError):
    pass


class ProtocolError(DvCheckError):
    pass
