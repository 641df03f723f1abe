"""Coordinate maps, spans, and pullback composition.

Spans are open systems: an apex space with two legs onto its boundary feet.
Composition glues two spans over a shared foot.  Only projection-relabel
connecting legs are composable here — every glued pair of coordinates is an
identification, so the pullback is again a global coordinate chart; general
legs would produce constraint manifolds this representation cannot hold.
General legs remain first-class for *validation*: `validate_leg` gives them
a sampled verdict instead of a structural proof.

Composite naming is deterministic: left-only units keep their names, shared
units take the left apex's preimage names, right-only units keep theirs;
any raw-name clash between the two contributions is qualified with an
``L_``/``R_`` prefix (repeated until free).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .errors import FootMismatch, MalformedAssignment, NonProjectionLeg
from .expr import Expr, Var
from .geometry import (
    CanonicalPair,
    ConfigSpace,
    PhaseSpace,
    poisson_map_failure,
    submersion_failure,
)
from .sampling import Box


class MapKind(Enum):
    PROJECTION_RELABEL = "projection-relabel"
    GENERAL = "general"


class SmoothMap:
    """Per-target-coordinate expressions in source coordinates and params.

    The kind tag is derived, not declared: a map is projection-relabel when
    every target coordinate is a distinct bare source coordinate and (for
    phase spaces) canonical pairs land on canonical pairs, q to q, p to p.
    """

    __slots__ = ("source", "target", "assignment", "kind")

    def __init__(self, source, target, assignment: Mapping[str, Expr]):
        if type(source) is not type(target):
            raise MalformedAssignment("map endpoints must be the same space type")
        missing = set(target.coords) - set(assignment)
        extra = set(assignment) - set(target.coords)
        if missing or extra:
            raise MalformedAssignment(
                f"assignment must cover target coordinates exactly once "
                f"(missing {sorted(missing)}, extra {sorted(extra)})"
            )
        allowed = set(source.coords) | source.params | target.params
        for name, e in assignment.items():
            if not isinstance(e, Expr):
                raise MalformedAssignment(f"assignment for {name!r} is not an expression")
            stray = e.free_vars() - allowed
            if stray:
                raise MalformedAssignment(f"assignment for {name!r} mentions {sorted(stray)}")
        self.source = source
        self.target = target
        self.assignment = {name: assignment[name] for name in target.coords}
        self.kind = self._classify()

    def _classify(self) -> MapKind:
        names = []
        for e in self.assignment.values():
            if not isinstance(e, Var) or e.name not in self.source.coords:
                return MapKind.GENERAL
            names.append(e.name)
        if len(set(names)) != len(names):
            return MapKind.GENERAL
        if isinstance(self.target, PhaseSpace):
            for tp in self.target.pairs:
                sq = self.assignment[tp.q].name
                sp = self.assignment[tp.p].name
                pair = self.source.pair_of(sq)
                if pair.q != sq or pair.p != sp:
                    return MapKind.GENERAL
        return MapKind.PROJECTION_RELABEL

    def __call__(self, binding):
        """Evaluate the map at a point: target coordinate values."""
        return {name: e.eval(binding) for name, e in self.assignment.items()}

    def __repr__(self):
        parts = ", ".join(f"{k}={v}" for k, v in self.assignment.items())
        return f"SmoothMap({parts})"


def identity_map(space) -> SmoothMap:
    return SmoothMap(space, space, {c: Var(c) for c in space.coords})


def compose_maps(outer: SmoothMap, inner: SmoothMap) -> SmoothMap:
    """outer after inner; substitution of inner's assignment into outer's."""
    if inner.target != outer.source:
        raise MalformedAssignment("maps do not chain: inner target differs from outer source")
    assignment = {name: e.substitute(inner.assignment) for name, e in outer.assignment.items()}
    return SmoothMap(inner.source, outer.target, assignment)


class Span:
    """Two legs out of a common apex."""

    __slots__ = ("left_leg", "right_leg")

    def __init__(self, left_leg: SmoothMap, right_leg: SmoothMap):
        if left_leg.source != right_leg.source:
            raise MalformedAssignment("span legs must share their apex")
        self.left_leg = left_leg
        self.right_leg = right_leg

    @property
    def apex(self):
        return self.left_leg.source

    @property
    def left_foot(self):
        return self.left_leg.target

    @property
    def right_foot(self):
        return self.right_leg.target

    def __repr__(self):
        return f"Span({self.left_foot!r} <- {self.apex!r} -> {self.right_foot!r})"


def identity_span(space) -> Span:
    leg = identity_map(space)
    return Span(leg, leg)


# ---------------------------------------------------------------------------
# Leg validation.

PROVEN = "Proven"
EVIDENCE = "Evidence"
FAILED = "Failed"


@dataclass(frozen=True)
class LegReport:
    verdict: str
    detail: str = ""
    samples: int | None = None

    @property
    def ok(self) -> bool:
        return self.verdict != FAILED

    def __str__(self):
        if self.verdict == EVIDENCE:
            return f"Evidence ({self.samples} samples)"
        if self.detail:
            return f"{self.verdict} ({self.detail})"
        return self.verdict


def _point_str(point) -> str:
    return ", ".join(f"{k}={point[k]:g}" for k in sorted(point))


def validate_leg(
    m: SmoothMap,
    box: Box | None = None,
    n: int = 100,
    tol: float = 1e-9,
    seed: int = 42,
    convention: str = "inverse",
) -> LegReport:
    """Surjective-submersion (and, on phase spaces, Poisson) verdict.

    Projection-relabel maps are decided structurally: they are onto, their
    differential is a full-rank selection everywhere, and they preserve
    brackets exactly when the glued pairs carry equal form coefficients.
    General maps only ever earn Evidence(n): full sampled rank plus sampled
    bracket preservation.
    """
    if m.kind is MapKind.PROJECTION_RELABEL:
        if isinstance(m.target, PhaseSpace):
            for tp in m.target.pairs:
                sp = m.source.pair_of(m.assignment[tp.q].name)
                if sp.coeff != tp.coeff:
                    return LegReport(
                        FAILED,
                        f"form coefficient mismatch on pair ({tp.q},{tp.p}): "
                        f"source {sp.coeff:g} vs target {tp.coeff:g}",
                    )
        return LegReport(PROVEN, "projection-relabel")
    failure = submersion_failure(m, box, n, tol, seed)
    if failure is not None:
        rank, point = failure
        return LegReport(FAILED, f"rank {rank} at {_point_str(point)}")
    if isinstance(m.target, PhaseSpace):
        bad = poisson_map_failure(m, m.source, m.target, box, n, tol, seed, convention)
        if bad is not None:
            ci, cj, point = bad
            return LegReport(FAILED, f"bracket identity fails for ({ci},{cj}) at {_point_str(point)}")
    return LegReport(EVIDENCE, samples=n)


def validate_span(span: Span, **kwargs) -> tuple[LegReport, LegReport]:
    return validate_leg(span.left_leg, **kwargs), validate_leg(span.right_leg, **kwargs)


# ---------------------------------------------------------------------------
# Pullback composition.


@dataclass(frozen=True)
class ComposeLayout:
    """Name bookkeeping for a composite apex.

    units: composite unit name-tuples in final order (a unit is a canonical
    pair on phase spaces, a single coordinate on config spaces);
    sources: parallel list of (origin, left_index, right_index) with origin
    "left" | "shared" | "right"; renames map every original apex coordinate
    to its composite name.
    """

    units: tuple[tuple[str, ...], ...]
    sources: tuple[tuple[str, int, int], ...]
    rename_left: dict[str, str]
    rename_right: dict[str, str]


def _layout(
    left_units: list[tuple[str, ...]],
    right_units: list[tuple[str, ...]],
    shared: list[tuple[int, int]],
) -> ComposeLayout:
    """shared is [(left_index, right_index)] in foot order."""
    shared_left = {li for li, _ in shared}
    shared_right = {ri for _, ri in shared}
    left_names = [n for u in left_units for n in u]
    right_only_names = [n for i, u in enumerate(right_units) if i not in shared_right for n in u]
    clash = set(left_names) & set(right_only_names)

    taken: set[str] = set()

    def claim(name: str, prefix: str) -> str:
        new = prefix + name if name in clash else name
        while new in taken:
            new = prefix + new
        taken.add(new)
        return new

    rename_left = {n: claim(n, "L_") for n in left_names}
    rename_right = {n: claim(n, "R_") for n in right_only_names}
    for li, ri in shared:
        for old, new_src in zip(right_units[ri], left_units[li]):
            rename_right[old] = rename_left[new_src]

    units: list[tuple[str, ...]] = []
    sources: list[tuple[str, int, int]] = []
    for i, u in enumerate(left_units):
        if i not in shared_left:
            units.append(tuple(rename_left[n] for n in u))
            sources.append(("left", i, -1))
    for li, ri in shared:
        units.append(tuple(rename_left[n] for n in left_units[li]))
        sources.append(("shared", li, ri))
    for i, u in enumerate(right_units):
        if i not in shared_right:
            units.append(tuple(rename_right[n] for n in u))
            sources.append(("right", -1, i))
    return ComposeLayout(tuple(units), tuple(sources), rename_left, rename_right)


def _shared_indices_phase(ab: Span, bc: Span) -> list[tuple[int, int]]:
    foot = ab.right_foot
    g, f2 = ab.right_leg, bc.left_leg
    left_index = {p.q: i for i, p in enumerate(ab.apex.pairs)}
    right_index = {p.q: i for i, p in enumerate(bc.apex.pairs)}
    shared = []
    for fp in foot.pairs:
        li = left_index[g.assignment[fp.q].name]
        ri = right_index[f2.assignment[fp.q].name]
        shared.append((li, ri))
    return shared


@dataclass(frozen=True)
class ComposedSpan:
    span: Span
    onto_left: SmoothMap  # composite apex -> left factor's apex
    onto_right: SmoothMap  # composite apex -> right factor's apex


def compose_spans_detailed(ab: Span, bc: Span) -> ComposedSpan:
    """Pullback composition over the shared foot, keeping the projections.

    The composite apex takes one copy of every glued pair; its form
    coefficient is the sum of the two incoming coefficients (standard legs
    give 2), which is what restricting the product 2-form to the graph of
    the identification produces.  Dimension is dim(left)+dim(right)-dim(foot).
    """
    if not isinstance(ab.apex, PhaseSpace):
        raise NonProjectionLeg("phase-space spans expected; config systems compose in lagsy")
    if ab.right_foot.pairs != bc.left_foot.pairs:
        raise FootMismatch(
            f"cannot glue: right foot pairs {ab.right_foot.pairs} differ from left foot pairs {bc.left_foot.pairs}"
        )
    for leg in (ab.right_leg, bc.left_leg):
        if leg.kind is not MapKind.PROJECTION_RELABEL:
            raise NonProjectionLeg("connecting legs must be projection-relabel maps")

    layout = _layout(
        [(p.q, p.p) for p in ab.apex.pairs],
        [(p.q, p.p) for p in bc.apex.pairs],
        _shared_indices_phase(ab, bc),
    )
    pairs = []
    for (q, p), (origin, li, ri) in zip(layout.units, layout.sources):
        if origin == "left":
            coeff = ab.apex.pairs[li].coeff
        elif origin == "right":
            coeff = bc.apex.pairs[ri].coeff
        else:
            coeff = ab.apex.pairs[li].coeff + bc.apex.pairs[ri].coeff
        pairs.append(CanonicalPair(q, p, coeff))
    apex = PhaseSpace(tuple(pairs), ab.apex.params | bc.apex.params)

    onto_left = SmoothMap(apex, ab.apex, {c: Var(layout.rename_left[c]) for c in ab.apex.coords})
    onto_right = SmoothMap(apex, bc.apex, {c: Var(layout.rename_right[c]) for c in bc.apex.coords})
    span = Span(compose_maps(ab.left_leg, onto_left), compose_maps(bc.right_leg, onto_right))
    return ComposedSpan(span, onto_left, onto_right)


def compose_spans(ab: Span, bc: Span) -> Span:
    return compose_spans_detailed(ab, bc).span


def config_compose_layout(ab: Span, bc: Span) -> ComposeLayout:
    """Layout for configuration spans (single-coordinate units)."""
    if not isinstance(ab.apex, ConfigSpace):
        raise NonProjectionLeg("config-space spans expected")
    if ab.right_foot.coords != bc.left_foot.coords:
        raise FootMismatch(
            f"cannot glue: right foot coords {ab.right_foot.coords} differ from left foot coords {bc.left_foot.coords}"
        )
    for leg in (ab.right_leg, bc.left_leg):
        if leg.kind is not MapKind.PROJECTION_RELABEL:
            raise NonProjectionLeg("connecting legs must be projection-relabel maps")
    left_index = {c: i for i, c in enumerate(ab.apex.coords)}
    right_index = {c: i for i, c in enumerate(bc.apex.coords)}
    shared = [
        (left_index[ab.right_leg.assignment[w].name], right_index[bc.left_leg.assignment[w].name])
        for w in ab.right_foot.coords
    ]
    return _layout(
        [(c,) for c in ab.apex.coords],
        [(c,) for c in bc.apex.coords],
        shared,
    )


# ---------------------------------------------------------------------------
# Products (monoidal structure).


def product_phase(s1: PhaseSpace, s2: PhaseSpace) -> tuple[PhaseSpace, dict[str, str], dict[str, str]]:
    """Product space with collision-qualified names; returns both renames."""
    layout = _layout([(p.q, p.p) for p in s1.pairs], [(p.q, p.p) for p in s2.pairs], shared=[])
    pairs = []
    for (q, p), (origin, li, ri) in zip(layout.units, layout.sources):
        coeff = s1.pairs[li].coeff if origin == "left" else s2.pairs[ri].coeff
        pairs.append(CanonicalPair(q, p, coeff))
    return (
        PhaseSpace(tuple(pairs), s1.params | s2.params),
        layout.rename_left,
        layout.rename_right,
    )


# ---------------------------------------------------------------------------
# Span isomorphism (relabeling with commuting triangles).


@dataclass(frozen=True)
class SpanIso:
    """Bijective coordinate relabeling between two apices.

    `rename` maps the SECOND span's apex coordinates to the first's, so
    substituting `{name: Var(rename[name])}` rewrites any expression on the
    second apex into first-apex coordinates.
    """

    rename: tuple[tuple[str, str], ...]

    def as_substitution(self) -> dict[str, Expr]:
        return {old: Var(new) for old, new in self.rename}

    def apply(self, e: Expr) -> Expr:
        return e.substitute(self.as_substitution())


def iso_commutes(s1: Span, s2: Span, iso: SpanIso) -> bool:
    """Independent witness check: both triangles commute under the relabeling."""
    sub = iso.as_substitution()
    for l1, l2 in ((s1.left_leg, s2.left_leg), (s1.right_leg, s2.right_leg)):
        for w in l1.target.coords:
            if l2.assignment[w].substitute(sub) != l1.assignment[w]:
                return False
    return True


def _units_of(space) -> list[tuple[str, ...]]:
    if isinstance(space, PhaseSpace):
        return [(p.q, p.p) for p in space.pairs]
    return [(c,) for c in space.coords]


def spans_isomorphic(s1: Span, s2: Span) -> SpanIso | None:
    """Search for a pair-preserving relabeling with commuting triangles.

    The legs pin every coordinate they reference; only units untouched by
    both legs are permuted, so the search is exhaustive but small for the
    apex sizes this library composes.  Returns a witness or None.
    """
    if s1.left_foot != s2.left_foot or s1.right_foot != s2.right_foot:
        raise FootMismatch("span isomorphism is only defined over identical feet")
    units1 = _units_of(s1.apex)
    units2 = _units_of(s2.apex)
    if len(units1) != len(units2) or type(s1.apex) is not type(s2.apex):
        return None

    unit_of_1 = {n: i for i, u in enumerate(units1) for n in u}
    unit_of_2 = {n: i for i, u in enumerate(units2) for n in u}
    pos_in_2 = {n: k for u in units2 for k, n in enumerate(u)}

    # Pin whole units from Var->Var leg entries; general entries are left to
    # the final triangle check.
    pinned: dict[int, int] = {}  # unit index in s2 -> unit index in s1
    for l1, l2 in ((s1.left_leg, s2.left_leg), (s1.right_leg, s2.right_leg)):
        for w in l1.target.coords:
            a1, a2 = l1.assignment[w], l2.assignment[w]
            if not (isinstance(a1, Var) and isinstance(a2, Var)):
                continue
            if pos_in_2[a2.name] != units1[unit_of_1[a1.name]].index(a1.name):
                return None  # would send a q to a p or vice versa
            u2, u1 = unit_of_2[a2.name], unit_of_1[a1.name]
            if pinned.setdefault(u2, u1) != u1:
                return None
    if len(set(pinned.values())) != len(pinned):
        return None

    free2 = [i for i in range(len(units2)) if i not in pinned]
    free1 = [i for i in range(len(units1)) if i not in set(pinned.values())]
    for perm in itertools.permutations(free1):
        match = dict(pinned)
        match.update(zip(free2, perm))
        rename = []
        ok = True
        for u2, u1 in match.items():
            if len(units2[u2]) != len(units1[u1]):
                ok = False
                break
            rename.extend(zip(units2[u2], units1[u1]))
        if not ok:
            continue
        iso = SpanIso(tuple(sorted(rename)))
        if iso_commutes(s1, s2, iso):
            return iso
    return None
