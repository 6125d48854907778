"""
exceptions.py - Error hierarchy for the flux regularity lab
Every error carries the process exit code the command line reports for it
"""

from typing import List, Optional


class FluxLabError(Exception):
    """Base class for all lab errors"""
    exit_code = 1

    def record(self) -> str:
        """Single-line machine-parseable form used on stderr"""
        message = str(self).replace('"', "'").replace('\n', ' ')
        return f'error kind={type(self).__name__} message="{message}"'


# flux_analysis

class DegenerateFlux(FluxLabError):
    """f'' vanishes identically on the working range"""


class NoFiniteOrder(FluxLabError):
    """Every derivative up to degree + 1 vanishes at an inflection point"""


class UnsupportedFlux(FluxLabError):
    """The flux does not have the shape an experiment requires"""


# riemann / front_tracking

class OffGrid(FluxLabError):
    """A state is not a value of the piecewise-affine flux grid"""


class NonGridValue(OffGrid):
    """Initial data holds a value outside the flux grid"""


class UnboundedSupport(FluxLabError):
    """Initial data support exceeds the declared domain"""


class CapExceeded(FluxLabError):
    """The event budget was exhausted before the final time"""
    exit_code = 3

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class OutOfTimeRange(FluxLabError):
    """Requested time lies outside [0, T]"""


# lagrangian

class SeedOutOfDomain(FluxLabError):
    """A characteristic seed lies outside the spatial domain"""


class AmbiguousAttachment(FluxLabError):
    """No outgoing wave can host a characteristic"""


class ValueMismatch(FluxLabError):
    """Two characteristics expected to carry the same value do not"""


class CharacteristicsCrossed(FluxLabError):
    """Characteristics from ordered seeds changed order"""


# variation

class SizeCap(FluxLabError):
    """Profile too long for the quadratic dynamic program"""


class InvalidPhi(FluxLabError):
    """Phi is not nonnegative, nondecreasing with Phi(0) = 0"""


# harness

class NotConvex(FluxLabError):
    """Flux is not uniformly convex on the data range"""


class NoEligiblePairs(FluxLabError):
    """No characteristic pair qualifies for the length estimate"""


class NoPolynomialDegeneracy(FluxLabError):
    """Flux has no finite degeneracy on the data range"""


class NoSignChange(FluxLabError):
    """The solution keeps one sign at the requested time"""


class OddP(FluxLabError):
    """Sign-change lemma requires an even degeneracy exponent"""


class VerificationFailed(FluxLabError):
    """At least one verification row failed"""
    exit_code = 2


# scenario files and outputs

class ParseError(FluxLabError):
    """Scenario file could not be read as JSON"""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        context = []
        if line is not None:
            context.append(f"line {line}")
        if key is not None:
            context.append(f"key '{key}'")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.line = line
        self.key = key


class ValidationError(FluxLabError):
    """Scenario document violates one or more invariants"""

    def __init__(self, errors: List[str]):
        super().__init__('; '.join(errors))
        self.errors = list(errors)


class UsageError(FluxLabError):
    """Bad command-line usage"""


class IoError(FluxLabError):
    """Artifact could not be written"""
