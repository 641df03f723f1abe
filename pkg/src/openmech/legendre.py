"""Lagrangian-to-Hamiltonian conversion and its compatibility reporter.

For the strictly convex class handled here the transform is closed form:
p = M(q) q̇ and H = (1/2) pᵀ M(q)⁻¹ p + V(q).  The span shape is preserved;
configuration coordinates q become canonical pairs (q, p_q) with unit form
coefficients, and projection legs lift pairwise.

Massless coordinates (no metric entry) keep their phase-space pair but
contribute no kinetic term: their momentum is identically zero under the
transform, matching the convention that a massless link carries zero
energy on its cotangent space.

Symbolic metric inversion covers coupling blocks of size 1 and 2.  Larger
coupled blocks have no closed-form H here: `ham` is then None and the
numeric evaluator `hamiltonian_at` (per-point Cholesky solve) stands in.

`functor_discrepancy` measures, never asserts: transforming factors first
and gluing second double-counts inverse masses on shared coordinates that
are massive in both factors, so the two orders agree only when every
shared coordinate carries mass in at most one factor.  The reporter
quantifies whichever case it is given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hamsy, lagsy
from .errors import NameCollision, NonProjectionLeg, SingularMetric
from .expr import Binding, Expr, Var, add, div, mul, neg, pow_int
from .geometry import CanonicalPair, ConfigSpace, PhaseSpace
from .lagsy import OpenLagrangianSystem, momentum_name, velocity_name
from .sampling import Box, sample_points
from .span import MapKind, SmoothMap, Span


def phase_space_of(config: ConfigSpace) -> PhaseSpace:
    """Cotangent chart: one standard pair (q, p_q) per configuration coordinate."""
    taken = set(config.coords)
    pairs = []
    for q in config.coords:
        p = momentum_name(q)
        if p in taken:
            raise NameCollision(f"momentum name {p!r} collides with an existing coordinate")
        taken.add(p)
        pairs.append(CanonicalPair(q, p, 1.0))
    return PhaseSpace(tuple(pairs), config.params)


def _lift_leg(leg: SmoothMap, src: PhaseSpace, dst: PhaseSpace) -> SmoothMap:
    if leg.kind is not MapKind.PROJECTION_RELABEL:
        raise NonProjectionLeg("only projection-relabel legs lift to phase space")
    assignment = {}
    for q in leg.target.coords:
        u = leg.assignment[q].name
        assignment[q] = Var(u)
        assignment[momentum_name(q)] = Var(momentum_name(u))
    return SmoothMap(src, dst, assignment)


def _coupling_blocks(space: ConfigSpace) -> list[list[str]]:
    """Connected components of the massive coordinates under off-diagonal coupling."""
    massive = list(space.massive_coords)
    parent = {c: c for c in massive}

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for u, v, _ in space.metric:
        if u != v:
            parent[find(u)] = find(v)
    blocks: dict[str, list[str]] = {}
    for c in massive:
        blocks.setdefault(find(c), []).append(c)
    return [blocks[root] for root in sorted(blocks, key=massive.index)]


def _block_inverse(space: ConfigSpace, block: list[str]) -> dict[tuple[str, str], Expr] | None:
    """Symbolic inverse entries for 1x1 and 2x2 blocks; None for larger."""

    def entry(u, v):
        e = space.metric_entry(u, v)
        return e if e is not None else None

    if len(block) == 1:
        (u,) = block
        return {(u, u): div(1.0, entry(u, u))}
    if len(block) == 2:
        u, v = block
        a = entry(u, u)
        d = entry(v, v)
        b = entry(u, v)
        if a is None or d is None:
            raise SingularMetric(f"coupled block ({u},{v}) lacks a diagonal mass entry")
        det = add(mul(a, d), neg(pow_int(b, 2)))
        from .expr import Const

        if isinstance(det, Const) and det.value == 0.0:
            raise SingularMetric(f"block ({u},{v}) has structurally zero determinant")
        return {
            (u, u): div(d, det),
            (v, v): div(a, det),
            (u, v): div(neg(b), det),
        }
    return None


@dataclass
class LegendreResult:
    """Transform output: the Hamiltonian system (when a closed form exists),
    the exact momentum map p = M(q) q̇, and a numeric energy evaluator."""

    ham: hamsy.OpenHamiltonianSystem | None
    momentum_map: list[tuple[str, Expr]]
    source: OpenLagrangianSystem

    def hamiltonian_at(self, binding: Binding) -> float:
        """(1/2) pᵀ M(q)⁻¹ p + V at a phase-space point, inverting numerically.

        Works for any block size; raises SingularMetric where the massive
        submatrix has no Cholesky factor (not SPD at that point)."""
        space = self.source.apex
        massive = space.massive_coords
        value = self.source.V.eval(binding)
        if not massive:
            return value
        size = len(massive)
        m = np.zeros((size, size))
        idx = {c: i for i, c in enumerate(massive)}
        for u, v, entry in space.metric:
            x = entry.eval(binding)
            m[idx[u], idx[v]] = x
            m[idx[v], idx[u]] = x
        p = np.array([binding[momentum_name(c)] for c in massive])
        try:
            chol = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise SingularMetric(f"mass matrix not positive-definite at sample on {massive}") from None
        y = np.linalg.solve(chol, p)
        return value + 0.5 * float(y @ y)


def to_hamiltonian(system: OpenLagrangianSystem) -> LegendreResult:
    """Transform a Lagrangian system, preserving the span shape."""
    config = system.apex
    phase_apex = phase_space_of(config)
    left = _lift_leg(system.span.left_leg, phase_apex, phase_space_of(system.span.left_foot))
    right = _lift_leg(system.span.right_leg, phase_apex, phase_space_of(system.span.right_foot))
    span = Span(left, right)

    kinetic: list[Expr] = []
    closed_form = True
    for block in _coupling_blocks(config):
        inverse = _block_inverse(config, block)
        if inverse is None:
            closed_form = False
            break
        for (u, v), entry in inverse.items():
            weight = 0.5 if u == v else 1.0
            kinetic.append(mul(weight, entry, Var(momentum_name(u)), Var(momentum_name(v))))

    ham = None
    if closed_form:
        ham = hamsy.OpenHamiltonianSystem(span, add(*kinetic, system.V))
    return LegendreResult(ham, lagsy.euler_lagrange_momenta(system), system)


def _pair_rename(frm: PhaseSpace, to: PhaseSpace) -> dict[str, Expr]:
    """Identify two phase spaces pair-by-pair via equal position names."""
    to_pair = {p.q: p for p in to.pairs}
    rename: dict[str, Expr] = {}
    for pair in frm.pairs:
        other = to_pair.get(pair.q)
        if other is None:
            raise NameCollision(f"no matching pair for coordinate {pair.q!r} in the other composite")
        rename[pair.q] = Var(other.q)
        rename[pair.p] = Var(other.p)
    return rename


def functor_discrepancy(
    a: OpenLagrangianSystem,
    b: OpenLagrangianSystem,
    box: Box | None = None,
    n: int = 100,
    seed: int = 42,
    param_box: tuple[float, float] = (0.5, 1.5),
) -> float:
    """max |H(transform(a∘b)) - H(transform(a) ∘ transform(b))| over samples.

    The two composite apices are identified pair-by-pair through their
    position-coordinate names.  Parameters default to positive samples
    (param_box) since they play the role of masses."""
    first = to_hamiltonian(lagsy.compose(a, b))
    second = hamsy.compose(to_hamiltonian(a).ham, to_hamiltonian(b).ham)
    if first.ham is None:
        raise SingularMetric("composite metric has no closed-form inverse; cannot compare symbolically")
    h1 = first.ham.H
    h2 = second.H.substitute(_pair_rename(second.apex, first.ham.apex))

    if box is None:
        box = {c: (-1.0, 1.0) for c in first.ham.apex.coords}
        for name in sorted((h1.free_vars() | h2.free_vars()) - set(box)):
            box[name] = param_box
    worst = 0.0
    for point in sample_points(box, n, seed):
        worst = max(worst, abs(h1.eval(point) - h2.eval(point)))
    return worst
