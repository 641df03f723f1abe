"""Open Lagrangian systems: configuration spans with potentials.

The apex configuration space carries the mass metric; the Lagrangian of a
system is L = (1/2) q̇ᵀ M(q) q̇ − V(q) with velocities named by the fixed
"_dot" suffix.  Composition glues the configuration spans, sums potentials,
and sums metric contributions on shared coordinates — the unique rule that
makes the composite Lagrangian equal the sum of the pulled-back factor
Lagrangians (kinetic terms add on identified velocities).

A factor may carry no metric entry at all on a shared coordinate (a
massless link); positive-definiteness is a property of whichever composite
is eventually transformed or simulated, not of each factor.
"""

from __future__ import annotations

from .errors import UnknownCoordinate
from .expr import Const, Expr, Var, add, mul, neg
from .geometry import ConfigSpace
from .span import SmoothMap, Span, compose_maps, config_compose_layout, identity_span

VELOCITY_SUFFIX = "_dot"


def velocity_name(coord: str) -> str:
    return coord + VELOCITY_SUFFIX


class OpenLagrangianSystem:
    __slots__ = ("span", "V")

    def __init__(self, span: Span, potential: Expr):
        apex = span.apex
        if not isinstance(apex, ConfigSpace):
            raise TypeError("Lagrangian systems live over configuration spaces")
        stray = potential.free_vars() - set(apex.coords) - apex.params
        if stray:
            raise UnknownCoordinate(f"potential mentions {sorted(stray)}, not on the apex")
        self.span = span
        self.V = potential

    @property
    def apex(self) -> ConfigSpace:
        return self.span.apex

    @property
    def metric(self):
        return self.apex.metric

    def __repr__(self):
        return f"OpenLagrangianSystem(V={self.V})"


def lagrangian_of(system: OpenLagrangianSystem) -> Expr:
    """L = (1/2) sum over metric entries of M_uv q̇_u q̇_v, minus V."""
    kinetic = []
    for u, v, entry in system.apex.metric:
        weight = 0.5 if u == v else 1.0  # off-diagonal entries appear twice in the form
        kinetic.append(mul(weight, entry, Var(velocity_name(u)), Var(velocity_name(v))))
    return add(*kinetic, neg(system.V))


def euler_lagrange_momenta(system: OpenLagrangianSystem) -> list[tuple[str, Expr]]:
    """Conjugate momenta p_q = dL/d(q̇), one per apex coordinate in order.

    Exactly linear in the velocities: p = M(q) q̇.  Massless coordinates get
    the constant 0."""
    lagrangian = lagrangian_of(system)
    return [(momentum_name(q), lagrangian.diff(velocity_name(q))) for q in system.apex.coords]


def momentum_name(coord: str) -> str:
    return "p_" + coord


def compose(a: OpenLagrangianSystem, b: OpenLagrangianSystem) -> OpenLagrangianSystem:
    """Glue configurations over the shared foot; metrics and potentials add."""
    layout = config_compose_layout(a.span, b.span)
    coords = tuple(u[0] for u in layout.units)
    sub_a = {old: Var(new) for old, new in layout.rename_left.items()}
    sub_b = {old: Var(new) for old, new in layout.rename_right.items()}

    entries: dict[tuple[str, str], Expr] = {}
    order = {c: i for i, c in enumerate(coords)}

    def accumulate(space: ConfigSpace, rename, sub):
        for u, v, entry in space.metric:
            nu, nv = rename[u], rename[v]
            if order[nu] > order[nv]:
                nu, nv = nv, nu
            moved = entry.substitute(sub)
            if (nu, nv) in entries:
                entries[(nu, nv)] = add(entries[(nu, nv)], moved)
            else:
                entries[(nu, nv)] = moved

    accumulate(a.apex, layout.rename_left, sub_a)
    accumulate(b.apex, layout.rename_right, sub_b)

    apex = ConfigSpace(
        coords,
        tuple((u, v, e) for (u, v), e in entries.items()),
        a.apex.params | b.apex.params,
    )
    onto_a = SmoothMap(apex, a.apex, {c: Var(layout.rename_left[c]) for c in a.apex.coords})
    onto_b = SmoothMap(apex, b.apex, {c: Var(layout.rename_right[c]) for c in b.apex.coords})
    span = Span(compose_maps(a.span.left_leg, onto_a), compose_maps(b.span.right_leg, onto_b))
    potential = add(a.V.substitute(sub_a), b.V.substitute(sub_b))
    return OpenLagrangianSystem(span, potential)


def identity_system(space: ConfigSpace) -> OpenLagrangianSystem:
    """Identity span on a metric-free copy of the space, V = 0.

    The apex drops the metric so that composing with the identity
    contributes nothing to the partner's kinetic term."""
    bare = ConfigSpace(space.coords, (), space.params)
    leg = SmoothMap(bare, space, {c: Var(c) for c in space.coords})
    return OpenLagrangianSystem(Span(leg, leg), Const(0.0))
