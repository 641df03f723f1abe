"""Coordinate phase spaces, Poisson brackets, and map verification.

A `PhaseSpace` is a global Darboux chart: an ordered list of canonical pairs
(q_i, p_i), each carrying a positive coefficient c_i on its dq_i^dp_i term
of the 2-form.  Standard spaces have c_i = 1 everywhere; gluing two systems
over a shared interface produces pairs with c = 2 (see `span`).

Bracket convention: a 2-form with coefficient c on a pair has the inverse
bivector coefficient b = 1/c, and that is what brackets and dynamics use by
default (`convention="inverse"`).  Passing `convention="paper"` instead uses
b = c, i.e. the coefficient is read off the bivector directly; the two
agree on standard pairs and differ on shared ones.  Both are provided
because the convention choice on glued pairs is genuinely ambiguous; the
switch makes the ambiguity explicit instead of resolving it silently.

Sampled checks here are evidence, not proofs: rank and bracket identities
are verified at deterministic sample points only.  Rank checks always
include the box midpoint among their samples so that symmetric rank drops
(a differential vanishing at the origin) are caught.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .errors import UnknownCoordinate
from .expr import Binding, Expr, add, mul, neg
from .sampling import Box, sample_points, unit_box

if TYPE_CHECKING:  # real import would be circular; geometry only duck-types maps
    from .span import SmoothMap

_VELOCITY_SUFFIX = "_dot"

CONVENTIONS = ("inverse", "paper")


@dataclass(frozen=True)
class CanonicalPair:
    q: str
    p: str
    coeff: float = 1.0

    def __post_init__(self):
        if self.q == self.p:
            raise ValueError(f"pair uses one name twice: {self.q!r}")
        if not self.coeff > 0.0:
            raise ValueError(f"form coefficient must be positive, got {self.coeff}")


def _check_names(coords: Sequence[str], params: Iterable[str]):
    seen = set()
    for name in coords:
        if name in seen:
            raise ValueError(f"duplicate coordinate name {name!r}")
        seen.add(name)
    clash = seen & set(params)
    if clash:
        raise ValueError(f"names used as both coordinate and parameter: {sorted(clash)}")


@dataclass(frozen=True)
class PhaseSpace:
    """Ordered canonical pairs plus symbolic constants (masses, g, ...)."""

    pairs: tuple[CanonicalPair, ...]
    params: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "params", frozenset(self.params))
        _check_names(self.coords, self.params)

    @property
    def coords(self) -> tuple[str, ...]:
        out = []
        for pair in self.pairs:
            out.append(pair.q)
            out.append(pair.p)
        return tuple(out)

    @property
    def dim(self) -> int:
        return 2 * len(self.pairs)

    def pair_of(self, name: str) -> CanonicalPair:
        for pair in self.pairs:
            if name in (pair.q, pair.p):
                return pair
        raise UnknownCoordinate(f"{name!r} is not a coordinate of this space")

    def default_box(self, lo: float = -1.0, hi: float = 1.0) -> dict[str, tuple[float, float]]:
        return unit_box(self.coords, lo, hi)


def standard_space(n: int, params: Iterable[str] = (), prefix_q: str = "q", prefix_p: str = "p") -> PhaseSpace:
    """n standard pairs; names q,p for n=1 and q1..qn,p1..pn otherwise."""
    if n == 1:
        pairs = (CanonicalPair(prefix_q, prefix_p),)
    else:
        pairs = tuple(CanonicalPair(f"{prefix_q}{i}", f"{prefix_p}{i}") for i in range(1, n + 1))
    return PhaseSpace(pairs, frozenset(params))


@dataclass(frozen=True)
class ConfigSpace:
    """Configuration coordinates with a sparse symmetric mass metric.

    `metric` holds upper-triangle entries (u, v, expr) with u <= v in
    coordinate order; coordinates with no entry are massless and contribute
    no kinetic term.  Writing an explicit zero mass is rejected — leave the
    entry out instead.
    """

    coords: tuple[str, ...]
    metric: tuple[tuple[str, str, Expr], ...] = ()
    params: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "params", frozenset(self.params))
        _check_names(self.coords, self.params)
        for name in self.coords:
            if name.endswith(_VELOCITY_SUFFIX):
                raise ValueError(f"coordinate name {name!r} ends with the reserved velocity suffix")
        index = {c: i for i, c in enumerate(self.coords)}
        canon: dict[tuple[str, str], Expr] = {}
        for u, v, entry in self.metric:
            if u not in index or v not in index:
                raise UnknownCoordinate(f"metric entry on ({u},{v}) outside the coordinate list")
            if index[u] > index[v]:
                u, v = v, u
            if (u, v) in canon:
                raise ValueError(f"metric entry ({u},{v}) given twice")
            allowed = set(self.coords) | self.params
            stray = entry.free_vars() - allowed
            if stray:
                raise UnknownCoordinate(f"metric entry ({u},{v}) mentions {sorted(stray)}")
            from .expr import Const  # local to avoid polluting module namespace

            if isinstance(entry, Const) and entry.value == 0.0:
                continue  # structural zero: massless, store nothing
            canon[(u, v)] = entry
        ordered = sorted(canon, key=lambda uv: (index[uv[0]], index[uv[1]]))
        object.__setattr__(self, "metric", tuple((u, v, canon[(u, v)]) for u, v in ordered))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def metric_entry(self, u: str, v: str) -> Expr | None:
        index = {c: i for i, c in enumerate(self.coords)}
        if index[u] > index[v]:
            u, v = v, u
        for a, b, entry in self.metric:
            if (a, b) == (u, v):
                return entry
        return None

    @property
    def massive_coords(self) -> tuple[str, ...]:
        seen = []
        for u, v, _ in self.metric:
            for name in (u, v):
                if name not in seen:
                    seen.append(name)
        return tuple(sorted(seen, key=self.coords.index))

    def default_box(self, lo: float = -1.0, hi: float = 1.0) -> dict[str, tuple[float, float]]:
        return unit_box(self.coords, lo, hi)


def diagonal_metric(entries: Mapping[str, Expr | float]) -> tuple[tuple[str, str, Expr], ...]:
    from .expr import _coerce

    return tuple((name, name, _coerce(e)) for name, e in entries.items())


def _bivector(pair: CanonicalPair, convention: str) -> float:
    if convention == "inverse":
        return 1.0 / pair.coeff
    if convention == "paper":
        return pair.coeff
    raise ValueError(f"unknown bracket convention {convention!r} (use one of {CONVENTIONS})")


def _check_scope(space: PhaseSpace, *exprs: Expr):
    allowed = set(space.coords) | space.params
    for e in exprs:
        stray = e.free_vars() - allowed
        if stray:
            raise UnknownCoordinate(f"expression mentions {sorted(stray)}, not in the space")


def poisson_bracket(f: Expr, g: Expr, space: PhaseSpace, convention: str = "inverse") -> Expr:
    """{f,g} = sum_i b_i (df/dq_i dg/dp_i - df/dp_i dg/dq_i), folded."""
    _check_scope(space, f, g)
    terms = []
    for pair in space.pairs:
        b = _bivector(pair, convention)
        terms.append(
            mul(b, add(mul(f.diff(pair.q), g.diff(pair.p)), neg(mul(f.diff(pair.p), g.diff(pair.q)))))
        )
    return add(*terms)


def jacobi_residual(
    f: Expr,
    g: Expr,
    h: Expr,
    space: PhaseSpace,
    box: Box | None = None,
    n: int = 100,
    seed: int = 42,
    convention: str = "inverse",
) -> float:
    """Max |{f,{g,h}} + {g,{h,f}} + {h,{f,g}}| over n sample points."""
    cyclic = add(
        poisson_bracket(f, poisson_bracket(g, h, space, convention), space, convention),
        poisson_bracket(g, poisson_bracket(h, f, space, convention), space, convention),
        poisson_bracket(h, poisson_bracket(f, g, space, convention), space, convention),
    )
    if box is None:
        box = unit_box(sorted(set(space.coords) | (cyclic.free_vars() - set(space.coords))))
    worst = 0.0
    for point in sample_points(box, n, seed):
        worst = max(worst, abs(cyclic.eval(point)))
    return worst


def _map_box(phi: "SmoothMap", box: Box | None) -> Box:
    if box is not None:
        return box
    names = set(phi.source.coords)
    for e in phi.assignment.values():
        names |= e.free_vars()
    return unit_box(sorted(names))


def poisson_map_failure(
    phi: "SmoothMap",
    src: PhaseSpace,
    dst: PhaseSpace,
    box: Box | None = None,
    n: int = 100,
    tol: float = 1e-9,
    seed: int = 42,
    convention: str = "inverse",
) -> tuple[str, str, dict[str, float]] | None:
    """First coordinate pair and sample point violating bracket preservation.

    {x_i, x_j}_dst o phi is compared with {x_i o phi, x_j o phi}_src for
    every unordered pair of destination coordinates; coordinate functions
    suffice because both sides are determined by bilinearity and the
    Leibniz rule.  Returns None when every identity holds within tol at
    all n sample points.
    """
    if phi.source is not src and phi.source != src:
        raise ValueError("phi does not start at src")
    if phi.target is not dst and phi.target != dst:
        raise ValueError("phi does not land in dst")
    coords = dst.coords
    box = _map_box(phi, box)
    points = sample_points(box, n, seed)
    from .expr import Var

    for i in range(len(coords)):
        for j in range(i + 1, len(coords)):
            lhs = poisson_bracket(Var(coords[i]), Var(coords[j]), dst, convention).substitute(phi.assignment)
            rhs = poisson_bracket(phi.assignment[coords[i]], phi.assignment[coords[j]], src, convention)
            for point in points:
                a = lhs.eval(point)
                b = rhs.eval(point)
                if abs(a - b) > tol * (1.0 + max(abs(a), abs(b))):
                    return coords[i], coords[j], point
    return None


def is_poisson_map(
    phi: "SmoothMap",
    src: PhaseSpace,
    dst: PhaseSpace,
    box: Box | None = None,
    n: int = 100,
    tol: float = 1e-9,
    seed: int = 42,
    convention: str = "inverse",
) -> bool:
    """True iff no sampled bracket-preservation failure was found."""
    return poisson_map_failure(phi, src, dst, box, n, tol, seed, convention) is None


def hamiltonian_vector_field(H: Expr, space: PhaseSpace, convention: str = "inverse") -> list[tuple[str, Expr]]:
    """Velocity expressions (dq_i/dt, dp_i/dt) = (b_i dH/dp_i, -b_i dH/dq_i),
    one per coordinate in the space's coordinate order."""
    _check_scope(space, H)
    field = []
    for pair in space.pairs:
        b = _bivector(pair, convention)
        field.append((pair.q, mul(b, H.diff(pair.p))))
        field.append((pair.p, neg(mul(b, H.diff(pair.q)))))
    return field


# ---------------------------------------------------------------------------
# Numerical rank / submersion evidence.


def _pivot_rank(mat: np.ndarray, tol: float) -> int:
    """Rank by full-pivot Gaussian elimination; pivots are counted while they
    exceed tol times the largest pivot seen (the first, by full pivoting)."""
    a = np.array(mat, dtype=float)
    if a.size == 0:
        return 0
    rank = 0
    scale = None
    rows, cols = a.shape
    for _ in range(min(rows, cols)):
        sub = np.abs(a[rank:, :])
        if sub.size == 0:
            break
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        pivot = abs(a[rank + i, j])
        if scale is None:
            scale = pivot
        if scale == 0.0 or pivot <= tol * scale:
            break
        i += rank
        a[[rank, i], :] = a[[i, rank], :]
        for r in range(rank + 1, rows):
            a[r, :] -= (a[r, j] / a[rank, j]) * a[rank, :]
        rank += 1
    return rank


def jacobian_at(phi: "SmoothMap", binding: Binding) -> np.ndarray:
    """[d phi_j / d x_i] with one row per target coordinate, one column per
    source coordinate, evaluated at the binding."""
    src_coords = phi.source.coords
    rows = []
    for tgt in phi.target.coords:
        e = phi.assignment[tgt]
        rows.append([e.diff(x).eval(binding) for x in src_coords])
    return np.array(rows, dtype=float).reshape(len(phi.target.coords), len(src_coords))


def jacobian_rank_at(phi: "SmoothMap", binding: Binding, tol: float = 1e-9) -> int:
    return _pivot_rank(jacobian_at(phi, binding), tol)


def check_submersion_samples(
    phi: "SmoothMap",
    box: Box | None = None,
    n: int = 100,
    tol: float = 1e-9,
    seed: int = 42,
) -> bool:
    """Full Jacobian rank at all n samples (midpoint included): necessary
    evidence for a submersion, never a proof."""
    return submersion_failure(phi, box, n, tol, seed) is None


def submersion_failure(
    phi: "SmoothMap",
    box: Box | None = None,
    n: int = 100,
    tol: float = 1e-9,
    seed: int = 42,
) -> tuple[int, dict[str, float]] | None:
    """First sample point where the Jacobian drops rank, or None."""
    want = len(phi.target.coords)
    box = _map_box(phi, box)
    for point in sample_points(box, n, seed, midpoint_first=True):
        rank = jacobian_rank_at(phi, point, tol)
        if rank < want:
            return rank, point
    return None


def check_metric_spd(
    space: ConfigSpace,
    box: Box | None = None,
    n: int = 100,
    seed: int = 42,
    param_box: tuple[float, float] = (0.5, 1.5),
) -> bool:
    """Massive submatrix positive-definite (Cholesky succeeds) at all samples.

    Parameters are sampled from param_box (positive by default: masses)."""
    massive = space.massive_coords
    if not massive:
        return True
    if box is None:
        box = dict(space.default_box())
        extra = set()
        for _, _, entry in space.metric:
            extra |= entry.free_vars()
        for name in sorted(extra - set(space.coords)):
            box[name] = param_box
    for point in sample_points(box, n, seed):
        m = np.zeros((len(massive), len(massive)))
        idx = {c: i for i, c in enumerate(massive)}
        for u, v, entry in space.metric:
            val = entry.eval(point)
            m[idx[u], idx[v]] = val
            m[idx[v], idx[u]] = val
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            return False
    return True
