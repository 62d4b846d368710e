"""Error hierarchy shared across the package.

Exit-code mapping for the CLI lives in cli.py; library code raises these
and never calls sys.exit.
"""


class PVForgeError(Exception):
    """Base class for all package errors."""


class ParseError(PVForgeError):
    """Malformed rational-function text, system file, or ideal file."""


class SingularPointError(PVForgeError):
    """An expansion point collided with a pole; caller may re-center."""

    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


class BoundExhaustedError(PVForgeError):
    """An escalation budget (truncation order, tower size, degree) ran out."""


class TowerBudgetError(BoundExhaustedError):
    """Extension tower grew past the configured degree budget."""


class UnsupportedShapeError(PVForgeError):
    """Input lies outside the supported desk-scale shape classes."""


class VerificationError(PVForgeError):
    """An exact certificate failed to validate."""


class InternalConsistencyError(PVForgeError):
    """A quantity that is provably constant or zero failed to be so."""
