"""Exception hierarchy shared by the numerical core and the Django surfaces."""


class OrdfuseError(Exception):
    """Base class for every error raised by the sensing package."""


class ContractViolation(OrdfuseError, ValueError):
    """A caller broke an operation's precondition."""


class InvalidScenario(ContractViolation):
    """A configuration breaks one of the scenario invariants."""

    def __init__(self, invariant, message=None):
        self.invariant = invariant
        detail = f" ({message})" if message else ""
        super().__init__(f"invariant violated: {invariant}{detail}")


class UndefinedConditionalError(OrdfuseError):
    """The marginal density at the conditioning value is zero."""


class UndefinedUpdateError(OrdfuseError):
    """Both hypothesis densities vanish at the observed value."""


class SolverError(OrdfuseError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{key}={value}" for key, value in sorted(self.diagnostics.items()))
        return f"{base} ({details})"


class ConfigError(OrdfuseError):
    """Configuration file could not be parsed or validated."""

    def __init__(self, message, section=None, key=None, line=None):
        self.section = section
        self.key = key
        self.line = line
        super().__init__(message)

    def __str__(self):
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.section:
            where.append(f"[{self.section}]")
        if self.key:
            where.append(self.key)
        prefix = " ".join(where)
        message = super().__str__()
        return f"{prefix}: {message}" if prefix else message
