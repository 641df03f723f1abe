"""Open classical mechanical systems as decorated spans of phase spaces.

Build systems from pieces: describe each piece as a span (apex space with
two interface legs) decorated by an energy function, glue pieces by
pullback over shared interfaces, convert Lagrangian descriptions to
Hamiltonian ones, and integrate the result with conservation checks.
"""

from . import dynamics, expr, geometry, hamsy, lagsy, legendre, span
from .dynamics import IntegratorConfig, Trajectory, conserved_residual, energy_drift, simulate
from .errors import (
    DomainError,
    FootMismatch,
    MalformedAssignment,
    NonProjectionLeg,
    NonSeparable,
    OpenMechError,
    ParseError,
    SingularMetric,
    UnboundVariable,
    UnknownCoordinate,
)
from .expr import Const, Expr, Var, equal_on_samples, parse_expression
from .geometry import (
    CanonicalPair,
    ConfigSpace,
    PhaseSpace,
    hamiltonian_vector_field,
    is_poisson_map,
    jacobi_residual,
    poisson_bracket,
    standard_space,
)
from .hamsy import OpenHamiltonianSystem
from .lagsy import OpenLagrangianSystem, euler_lagrange_momenta, lagrangian_of
from .legendre import LegendreResult, functor_discrepancy, to_hamiltonian
from .span import SmoothMap, Span, compose_spans, identity_span, spans_isomorphic, validate_leg

__version__ = "0.1.0"
