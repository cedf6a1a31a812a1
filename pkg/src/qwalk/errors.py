"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class QWalkError(Exception):
    exit_code = 1


class CapacityError(QWalkError):
    """Requested size exceeds what the dense/full-space code paths support."""

    exit_code = 2


class SpecError(QWalkError, ValueError):
    """Invalid instance, driver, ensemble or figure specification."""

    exit_code = 3


class NumericalError(QWalkError, ArithmeticError):
    """A numerical routine failed to converge or produced an invalid result."""

    exit_code = 4
