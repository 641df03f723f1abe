"""Open Hamiltonian systems: spans of phase spaces with an energy decoration.

Decorations add under both operations.  Composing over a shared foot pulls
each Hamiltonian back along its projection and sums; tensoring is the same
on a product apex.  The identity system carries H = 0 — the only decoration
that leaves composition partners unchanged, since decorations add.

Composite Hamiltonians are stored substituted (one closed expression on the
composite apex), not as lazy sums: dynamics and reporting want a single
formula.
"""

from __future__ import annotations

from .errors import UnknownCoordinate
from .expr import Const, Expr, Var, add
from .geometry import PhaseSpace
from .span import SmoothMap, Span, compose_spans_detailed, identity_span, product_phase


class OpenHamiltonianSystem:
    __slots__ = ("span", "H")

    def __init__(self, span: Span, hamiltonian: Expr):
        apex = span.apex
        stray = hamiltonian.free_vars() - set(apex.coords) - apex.params
        if stray:
            raise UnknownCoordinate(f"Hamiltonian mentions {sorted(stray)}, not on the apex")
        self.span = span
        self.H = hamiltonian

    @property
    def apex(self) -> PhaseSpace:
        return self.span.apex

    def __repr__(self):
        return f"OpenHamiltonianSystem(H={self.H})"


def compose(a: OpenHamiltonianSystem, b: OpenHamiltonianSystem) -> OpenHamiltonianSystem:
    """Glue over the shared foot; H'' = H∘π_left + H'∘π_right."""
    d = compose_spans_detailed(a.span, b.span)
    h = add(a.H.substitute(d.onto_left.assignment), b.H.substitute(d.onto_right.assignment))
    return OpenHamiltonianSystem(d.span, h)


def tensor(a: OpenHamiltonianSystem, b: OpenHamiltonianSystem) -> OpenHamiltonianSystem:
    """Disjoint (renamed-apart) juxtaposition: product span, summed energies."""
    apex, ren_a, ren_b = product_phase(a.apex, b.apex)
    apex_sub_a = {old: Var(new) for old, new in ren_a.items()}
    apex_sub_b = {old: Var(new) for old, new in ren_b.items()}

    def build_leg(leg_a: SmoothMap, leg_b: SmoothMap) -> SmoothMap:
        foot, foot_ren_a, foot_ren_b = product_phase(leg_a.target, leg_b.target)
        assignment = {}
        for old, new in foot_ren_a.items():
            assignment[new] = leg_a.assignment[old].substitute(apex_sub_a)
        for old, new in foot_ren_b.items():
            assignment[new] = leg_b.assignment[old].substitute(apex_sub_b)
        return SmoothMap(apex, foot, assignment)

    left = build_leg(a.span.left_leg, b.span.left_leg)
    right = build_leg(a.span.right_leg, b.span.right_leg)
    h = add(a.H.substitute(apex_sub_a), b.H.substitute(apex_sub_b))
    return OpenHamiltonianSystem(Span(left, right), h)


def identity_system(space: PhaseSpace) -> OpenHamiltonianSystem:
    return OpenHamiltonianSystem(identity_span(space), Const(0.0))
