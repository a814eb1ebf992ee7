"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class FreeMembraneError(Exception):
    """Base class; ``code`` is the machine-readable error name."""

    code = "Error"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details

    def record(self) -> dict:
        """Machine-readable form used by the CLI error file."""
        rec = {"error": self.code, "message": str(self)}
        for key, val in self.details.items():
            rec[key] = val if isinstance(val, (int, float, str, bool, type(None))) else repr(val)
        return rec


# --- device description -----------------------------------------------------

class SpecIssue(FreeMembraneError, ValueError):
    pass


class OverlappingSegments(SpecIssue):
    code = "OverlappingSegments"


class PillarOutsideBeam(SpecIssue):
    code = "PillarOutsideBeam"


class NegativeDimension(SpecIssue):
    code = "NegativeDimension"


class ElectrodeOnWrongSideOfPillar(SpecIssue):
    code = "ElectrodeOnWrongSideOfPillar"


class InvalidSpec(FreeMembraneError, ValueError):
    """Aggregate of every violated invariant found by ``validate_spec``."""

    code = "InvalidSpec"

    def __init__(self, issues: list[SpecIssue]):
        self.issues = list(issues)
        msg = "; ".join(f"{i.code}: {i}" for i in self.issues)
        super().__init__(msg, codes=",".join(self.codes))

    @property
    def codes(self) -> list[str]:
        return [i.code for i in self.issues]


class TooFewElements(FreeMembraneError, ValueError):
    code = "TooFewElements"


class OutOfRange(FreeMembraneError, ValueError):
    code = "OutOfRange"


# --- mechanics / electrostatics ---------------------------------------------

class NonPositiveDimension(FreeMembraneError, ValueError):
    code = "NonPositiveDimension"


class SingularSystem(FreeMembraneError, ArithmeticError):
    code = "SingularSystem"


class InvalidPermittivity(FreeMembraneError, ValueError):
    code = "InvalidPermittivity"


class ZeroGap(FreeMembraneError, ValueError):
    code = "ZeroGap"


class PenetrationWithoutContact(FreeMembraneError, ValueError):
    code = "PenetrationWithoutContact"


# --- nonlinear solver ---------------------------------------------------------

class NoConvergence(FreeMembraneError, ArithmeticError):
    code = "NoConvergence"


class NoPullInBelowVmax(FreeMembraneError):
    code = "NoPullInBelowVmax"


class NeverReleases(FreeMembraneError):
    code = "NeverReleases"


class NoContact(FreeMembraneError, ValueError):
    code = "NoContact"


class NoUnstickBelowVmax(FreeMembraneError):
    code = "NoUnstickBelowVmax"


# --- RF -------------------------------------------------------------------------

class NonPositiveForce(FreeMembraneError, ValueError):
    code = "NonPositiveForce"


class EmptyGrid(FreeMembraneError, ValueError):
    code = "EmptyGrid"


class NonAscendingGrid(FreeMembraneError, ValueError):
    code = "NonAscendingGrid"


class UnreachableTarget(FreeMembraneError, ValueError):
    code = "UnreachableTarget"


class IoFailure(FreeMembraneError, OSError):
    code = "IoFailure"


# --- CLI / config -----------------------------------------------------------------

class ConfigError(FreeMembraneError, ValueError):
    code = "ConfigError"


class NonRectangularTable(FreeMembraneError, ValueError):
    code = "NonRectangularTable"
