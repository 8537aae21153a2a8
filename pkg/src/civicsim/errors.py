"""Exception hierarchy shared across the simulation packages."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(SimulationError):
    """Invalid setup: bad parameters, registration after seal, empty council."""


class ConstraintError(SimulationError):
    """A structural rule was violated (role compatibility, empty role set)."""


class BoundaryViolation(SimulationError):
    """Message sender and receiver share no environment."""


class UnknownEnvironmentError(SimulationError):
    """Lookup of an environment id that was never created."""


class StageError(SimulationError):
    """Illegal proposal lifecycle transition or wrong-stage operation."""


class SchemaError(SimulationError):
    """Reference to an attribute that is not part of the proposal schema."""


class IntegrityError(SimulationError):
    """Append-only store invariant violated (duplicate key)."""


class ValidationError(SimulationError):
    """Scenario config validation failure; carries every violation found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
