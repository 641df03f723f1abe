"""Exception types shared across the package."""


class OpenMechError(Exception):
    """Base class for all errors raised by this package."""


class UnboundVariable(OpenMechError):
    """An expression was evaluated with a free variable missing from the binding."""

    def __init__(self, name):
        super().__init__(f"unbound variable '{name}'")
        self.name = name


class DomainError(OpenMechError):
    """Evaluation left the real domain (division by zero, sqrt of a negative)."""


class UnknownCoordinate(OpenMechError):
    """An expression mentions a variable that is not a coordinate or parameter of the space."""


class MalformedAssignment(OpenMechError):
    """A coordinate map does not assign every target coordinate exactly once."""


class FootMismatch(OpenMechError):
    """Span composition was attempted over feet that are not the same space."""


class NonProjectionLeg(OpenMechError):
    """A pullback was requested along a general (non projection-relabel) leg."""


class SingularMetric(OpenMechError):
    """The mass metric is not symmetric positive-definite where it was needed."""


class NonSeparable(OpenMechError):
    """Verlet integration was requested but the Hamiltonian does not split as T(p)+V(q)."""


class NameCollision(OpenMechError):
    """A generated coordinate name clashed with an existing one."""


class ParseError(OpenMechError):
    """Syntax error with source position and the set of expected tokens."""

    def __init__(self, line, col, expected, found=""):
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        self.found = found
        want = ", ".join(self.expected)
        msg = f"{line}:{col}: expected {want}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class UndeclaredIdentifier(OpenMechError):
    """A declaration referenced a name that was not declared earlier."""


class DuplicateDeclaration(OpenMechError):
    """A name was declared twice in one system file."""
