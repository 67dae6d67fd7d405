"""Exception hierarchy shared by all modules."""


class DirichletError(Exception):
    """Base class for library errors."""


class DimensionError(DirichletError, ValueError):
    pass


class NonConvergenceError(DirichletError, RuntimeError):
    pass


class NotHyperbolicError(DirichletError, ValueError):
    """A polynomial that was required to be real-rooted has complex roots."""


class DegenerateSetError(DirichletError, RuntimeError):
    """The I-line {B + tI} never enters (or never leaves) the set."""


class ParameterError(DirichletError, ValueError):
    pass


class SamplingError(DirichletError, RuntimeError):
    pass


class PreconditionError(DirichletError, ValueError):
    pass


class VerificationError(DirichletError, RuntimeError):
    """A verification stage failed; carries the stage name and worst point."""

    def __init__(self, stage, message, point=None, value=None):
        self.stage = stage
        self.point = point
        self.value = value
        super().__init__(f"[{stage}] {message}")


class ExprError(DirichletError, ValueError):
    """Expression error carrying a source location (1-based line/column)."""

    def __init__(self, message, line=1, column=1):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class ParseError(ExprError):
    pass


class DomainError(ExprError):
    pass


class NonSmoothError(ExprError):
    pass


class ConfigError(DirichletError, ValueError):
    """Invalid configuration; ``pointer`` is a JSON pointer to the bad value."""

    def __init__(self, message, pointer=""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")
