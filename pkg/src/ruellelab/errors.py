"""Exception types raised across the package."""


class SystemDefinitionError(ValueError):
    """A system, environment or IFS violates a structural requirement."""


class BranchCapError(ValueError):
    """Preimage enumeration would exceed the configured branch cap."""


class NumericalGuardError(ArithmeticError):
    """A numerical safeguard tripped (nonpositive denominator, overflow, ...)."""


class DegenerateSystemError(NumericalGuardError):
    """The requested quantity is not defined for this input."""


class ConfigError(ValueError):
    """An experiment configuration failed schema validation."""
