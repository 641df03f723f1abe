"""`open-mech`: parse `.osys` system descriptions and drive the library.

Grammar (whitespace-insensitive, `#` line comments):

    file    := decl*
    decl    := param | space | map | system | action
    param   := "param" NAME ("=" NUMBER)?
    space   := ("phase_space" | "config_space") NAME "{" item* "}"
    item    := "pair" NAME NAME ("coeff" NUMBER)?      # phase_space only
             | "coord" NAME                            # config_space only
             | "metric" "[" row ("," row)* "]"         # config_space only
    row     := "[" expr ("," expr)* "]"
    map     := "map" NAME ":" NAME "->" NAME "{" (NAME "=" expr)* "}"
    system  := ("ham_system" | "lag_system") NAME
               "{" "span" LEFTMAP APEX RIGHTMAP ";" ("H"|"V") "=" expr "}"
    action  := "compose" NAME "=" NAME "*" NAME
             | "tensor" NAME "=" NAME "+" NAME
             | "legendre" NAME "=" NAME
             | "simulate" NAME "{" settings "}"
    settings := ( "dt" "=" NUMBER | "t_end" "=" NUMBER
                | "method" "=" ("rk4"|"verlet")
                | "init" NAME "=" NUMBER
                | "monitor" NAME "=" expr
                | "drive" NAME "=" expr )*

In a system the three span names are the left leg map, the apex space, and
the right leg map; both maps must have the apex as their source.  A metric
matrix covers the space's coordinates in declaration order; a structurally
zero entry means "no mass here" and is not stored.  Every identifier must
be declared before use; keywords are reserved.

Commands: check, compose, legendre, simulate, bracket.  Reports are
line-oriented `key: value` text on stdout, errors go to stderr, and exit
codes are 0 (ok), 1 (check failure), 2 (usage/parse error), 3 (runtime
domain error).  Simulation CSV goes to `<system>.csv` (or --out).
"""

from __future__ import annotations

import argparse
import re
import sys
from dataclasses import dataclass, field as dc_field

from . import dynamics, hamsy, lagsy, legendre
from .errors import (
    DomainError,
    DuplicateDeclaration,
    FootMismatch,
    MalformedAssignment,
    NonProjectionLeg,
    NonSeparable,
    ParseError,
    SingularMetric,
    UnboundVariable,
    UndeclaredIdentifier,
    UnknownCoordinate,
)
from .expr import Const, Expr, ExprParser, Token, format_expression, tokenize
from .geometry import CanonicalPair, ConfigSpace, PhaseSpace, jacobi_residual, poisson_bracket
from .span import FAILED, SmoothMap, Span, validate_leg

KEYWORDS = {
    "param", "phase_space", "config_space", "map", "ham_system", "lag_system",
    "compose", "tensor", "legendre", "simulate", "pair", "coord", "metric", "span",
}

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


def _num(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# AST


@dataclass
class ParamDecl:
    name: str
    value: float | None
    pos: tuple[int, int] = dc_field(default=(0, 0), compare=False)


@dataclass
class PairItem:
    q: str
    p: str
    coeff: float | None


@dataclass
class CoordItem:
    name: str


@dataclass
class MetricItem:
    rows: list[list[Expr]]


@dataclass
class SpaceDecl:
    kind: str  # "phase_space" | "config_space"
    name: str
    items: list
    pos: tuple[int, int] = dc_field(default=(0, 0), compare=False)


@dataclass
class MapDecl:
    name: str
    source: str
    target: str
    assigns: list[tuple[str, Expr]]
    pos: tuple[int, int] = dc_field(default=(0, 0), compare=False)


@dataclass
class SystemDecl:
    kind: str  # "ham_system" | "lag_system"
    name: str
    left_map: str
    apex: str
    right_map: str
    decoration: Expr
    pos: tuple[int, int] = dc_field(default=(0, 0), compare=False)


@dataclass
class ComposeAction:
    name: str
    left: str
    right: str
    pos: tuple[int, int] = dc_field(default=(0, 0), compare=False)


@dataclass
class TensorAction:
    name: str
    left: str
    right: str
    pos: tuple[int, int] = dc_field(default=(0, 0), compare=False)


@dataclass
class LegendreAction:
    name: str
    source: str
    pos: tuple[int, int] = dc_field(default=(0, 0), compare=False)


@dataclass
class SimSettings:
    dt: float | None = None
    t_end: float | None = None
    method: str | None = None
    inits: list[tuple[str, float]] = dc_field(default_factory=list)
    monitors: list[tuple[str, Expr]] = dc_field(default_factory=list)
    drives: list[tuple[str, Expr]] = dc_field(default_factory=list)


@dataclass
class SimulateAction:
    target: str
    settings: SimSettings
    pos: tuple[int, int] = dc_field(default=(0, 0), compare=False)


@dataclass
class SystemFile:
    decls: list


# ---------------------------------------------------------------------------
# Parser


class FileParser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def _fail(self, *expected):
        t = self.peek()
        raise ParseError(t.line, t.col, expected, found=t.text or "end of input")

    def _name(self, what="a name") -> str:
        t = self.peek()
        if t.kind != "name":
            self._fail(what)
        self.pos += 1
        return t.text

    def _identifier(self) -> str:
        t = self.peek()
        name = self._name("an identifier")
        if name in KEYWORDS:
            raise ParseError(t.line, t.col, ("an identifier (keywords are reserved)",), found=name)
        return name

    def _sym(self, sym: str):
        t = self.peek()
        if t.kind != "sym" or t.text != sym:
            self._fail(f"'{sym}'")
        self.pos += 1

    def _accept_sym(self, sym: str) -> bool:
        t = self.peek()
        if t.kind == "sym" and t.text == sym:
            self.pos += 1
            return True
        return False

    def _keyword(self, word: str):
        t = self.peek()
        if t.kind != "name" or t.text != word:
            self._fail(f"'{word}'")
        self.pos += 1

    def _number(self) -> float:
        sign = 1.0
        if self._accept_sym("-"):
            sign = -1.0
        t = self.peek()
        if t.kind != "number":
            self._fail("a number")
        self.pos += 1
        return sign * float(t.text)

    def _expr(self) -> Expr:
        ep = ExprParser(self.tokens, self.pos)
        e = ep.expression()
        self.pos = ep.pos
        return e

    def parse(self) -> SystemFile:
        decls = []
        while self.peek().kind != "end":
            decls.append(self._decl())
        return SystemFile(decls)

    def _decl(self):
        t = self.peek()
        if t.kind != "name":
            self._fail("a declaration keyword")
        pos = (t.line, t.col)
        word = t.text
        if word == "param":
            self.pos += 1
            name = self._identifier()
            value = None
            if self._accept_sym("="):
                value = self._number()
            return ParamDecl(name, value, pos)
        if word in ("phase_space", "config_space"):
            self.pos += 1
            name = self._identifier()
            self._sym("{")
            items = []
            while not self._accept_sym("}"):
                items.append(self._item(word))
            return SpaceDecl(word, name, items, pos)
        if word == "map":
            self.pos += 1
            name = self._identifier()
            self._sym(":")
            source = self._identifier()
            self._sym("->")
            target = self._identifier()
            self._sym("{")
            assigns = []
            while not self._accept_sym("}"):
                coord = self._identifier()
                self._sym("=")
                assigns.append((coord, self._expr()))
            return MapDecl(name, source, target, assigns, pos)
        if word in ("ham_system", "lag_system"):
            self.pos += 1
            name = self._identifier()
            self._sym("{")
            self._keyword("span")
            left_map = self._identifier()
            apex = self._identifier()
            right_map = self._identifier()
            self._sym(";")
            label = "H" if word == "ham_system" else "V"
            self._keyword(label)
            self._sym("=")
            decoration = self._expr()
            self._sym("}")
            return SystemDecl(word, name, left_map, apex, right_map, decoration, pos)
        if word == "compose":
            self.pos += 1
            name = self._identifier()
            self._sym("=")
            left = self._identifier()
            self._sym("*")
            right = self._identifier()
            return ComposeAction(name, left, right, pos)
        if word == "tensor":
            self.pos += 1
            name = self._identifier()
            self._sym("=")
            left = self._identifier()
            self._sym("+")
            right = self._identifier()
            return TensorAction(name, left, right, pos)
        if word == "legendre":
            self.pos += 1
            name = self._identifier()
            self._sym("=")
            return LegendreAction(name, self._identifier(), pos)
        if word == "simulate":
            self.pos += 1
            target = self._identifier()
            self._sym("{")
            settings = self._settings()
            return SimulateAction(target, settings, pos)
        self._fail("param", "phase_space", "config_space", "map", "ham_system",
                   "lag_system", "compose", "tensor", "legendre", "simulate")

    def _item(self, space_kind: str):
        t = self.peek()
        if t.kind != "name":
            self._fail("'pair'", "'coord'", "'metric'")
        if t.text == "pair":
            if space_kind != "phase_space":
                raise ParseError(t.line, t.col, ("'coord' or 'metric' (pairs live in phase spaces)",), found=t.text)
            self.pos += 1
            q = self._identifier()
            ptok = self.peek()
            p = self._identifier()
            if p == q:
                raise ParseError(ptok.line, ptok.col, ("a distinct momentum name",), found=p)
            coeff = None
            nxt = self.peek()
            if nxt.kind == "name" and nxt.text == "coeff":
                self.pos += 1
                coeff = self._number()
            return PairItem(q, p, coeff)
        if t.text == "coord":
            if space_kind != "config_space":
                raise ParseError(t.line, t.col, ("'pair' (coords live in config spaces)",), found=t.text)
            self.pos += 1
            return CoordItem(self._identifier())
        if t.text == "metric":
            if space_kind != "config_space":
                raise ParseError(t.line, t.col, ("'pair' (metrics live in config spaces)",), found=t.text)
            self.pos += 1
            self._sym("[")
            rows = []
            if not self._accept_sym("]"):
                rows.append(self._row())
                while self._accept_sym(","):
                    rows.append(self._row())
                self._sym("]")
            return MetricItem(rows)
        self._fail("'pair'", "'coord'", "'metric'")

    def _row(self) -> list[Expr]:
        self._sym("[")
        entries = [self._expr()]
        while self._accept_sym(","):
            entries.append(self._expr())
        self._sym("]")
        return entries

    def _settings(self) -> SimSettings:
        s = SimSettings()
        while not self._accept_sym("}"):
            t = self.peek()
            key = self._name("a setting (dt, t_end, method, init, monitor, drive)")
            if key == "dt":
                self._sym("=")
                s.dt = self._number()
            elif key == "t_end":
                self._sym("=")
                s.t_end = self._number()
            elif key == "method":
                self._sym("=")
                m = self._name("'rk4' or 'verlet'")
                if m not in dynamics.METHODS:
                    self._fail("'rk4'", "'verlet'")
                s.method = m
            elif key == "init":
                name = self._identifier()
                self._sym("=")
                s.inits.append((name, self._number()))
            elif key == "monitor":
                name = self._identifier()
                self._sym("=")
                s.monitors.append((name, self._expr()))
            elif key == "drive":
                name = self._identifier()
                self._sym("=")
                s.drives.append((name, self._expr()))
            else:
                raise ParseError(t.line, t.col, ("dt", "t_end", "method", "init", "monitor", "drive"), found=key)
        return s


def parse(text: str) -> SystemFile:
    return FileParser(text).parse()


# ---------------------------------------------------------------------------
# Printer (round-trips through parse).


def print_system_file(sf: SystemFile) -> str:
    out = []
    for d in sf.decls:
        if isinstance(d, ParamDecl):
            out.append(f"param {d.name}" + (f" = {_num(d.value)}" if d.value is not None else ""))
        elif isinstance(d, SpaceDecl):
            items = []
            for item in d.items:
                if isinstance(item, PairItem):
                    s = f"pair {item.q} {item.p}"
                    if item.coeff is not None:
                        s += f" coeff {_num(item.coeff)}"
                    items.append(s)
                elif isinstance(item, CoordItem):
                    items.append(f"coord {item.name}")
                else:
                    rows = ", ".join(
                        "[" + ", ".join(format_expression(e) for e in row) + "]" for row in item.rows
                    )
                    items.append(f"metric [{rows}]")
            body = " ".join(items)
            out.append(f"{d.kind} {d.name} {{ {body} }}" if items else f"{d.kind} {d.name} {{ }}")
        elif isinstance(d, MapDecl):
            body = " ".join(f"{c} = {format_expression(e)}" for c, e in d.assigns)
            out.append(f"map {d.name} : {d.source} -> {d.target} {{ {body} }}" if body
                       else f"map {d.name} : {d.source} -> {d.target} {{ }}")
        elif isinstance(d, SystemDecl):
            label = "H" if d.kind == "ham_system" else "V"
            out.append(
                f"{d.kind} {d.name} {{ span {d.left_map} {d.apex} {d.right_map} ; "
                f"{label} = {format_expression(d.decoration)} }}"
            )
        elif isinstance(d, ComposeAction):
            out.append(f"compose {d.name} = {d.left} * {d.right}")
        elif isinstance(d, TensorAction):
            out.append(f"tensor {d.name} = {d.left} + {d.right}")
        elif isinstance(d, LegendreAction):
            out.append(f"legendre {d.name} = {d.source}")
        elif isinstance(d, SimulateAction):
            s = d.settings
            parts = []
            if s.dt is not None:
                parts.append(f"dt = {_num(s.dt)}")
            if s.t_end is not None:
                parts.append(f"t_end = {_num(s.t_end)}")
            if s.method is not None:
                parts.append(f"method = {s.method}")
            parts.extend(f"init {n} = {_num(v)}" for n, v in s.inits)
            parts.extend(f"monitor {n} = {format_expression(e)}" for n, e in s.monitors)
            parts.extend(f"drive {n} = {format_expression(e)}" for n, e in s.drives)
            body = " ".join(parts)
            out.append(f"simulate {d.target} {{ {body} }}" if body else f"simulate {d.target} {{ }}")
        else:
            raise TypeError(f"unknown declaration {d!r}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Semantic build: declarations to library objects, actions executed eagerly
# (simulations excepted — they only run under the simulate command).


class Environment:
    def __init__(self):
        self.objects: dict[str, object] = {}
        self.params: dict[str, float] = {}
        self.param_names: list[str] = []
        self.system_decls: dict[str, SystemDecl] = {}
        self.lag_compositions: dict[str, tuple[str, str]] = {}
        self.compose_actions: list = []
        self.legendre_actions: list[LegendreAction] = []
        self.simulate_actions: list[SimulateAction] = []

    def declare(self, name: str, obj):
        if name in self.objects:
            raise DuplicateDeclaration(f"{name!r} is declared twice")
        self.objects[name] = obj

    def lookup(self, name: str):
        if name not in self.objects:
            raise UndeclaredIdentifier(f"{name!r} referenced before declaration")
        return self.objects[name]


def _build_space(decl: SpaceDecl, params: list[str]):
    if decl.kind == "phase_space":
        pairs = []
        for item in decl.items:
            pairs.append(CanonicalPair(item.q, item.p, item.coeff if item.coeff is not None else 1.0))
        return PhaseSpace(tuple(pairs), frozenset(params))
    coords = [item.name for item in decl.items if isinstance(item, CoordItem)]
    metric_items = [item for item in decl.items if isinstance(item, MetricItem)]
    entries = []
    if metric_items:
        if len(metric_items) > 1:
            raise MalformedAssignment(f"space {decl.name!r} declares more than one metric")
        rows = metric_items[0].rows
        if len(rows) != len(coords) or any(len(r) != len(coords) for r in rows):
            raise MalformedAssignment(
                f"metric of {decl.name!r} must be {len(coords)}x{len(coords)} over its coords"
            )
        for i in range(len(coords)):
            for j in range(i, len(coords)):
                if rows[i][j] != rows[j][i]:
                    raise MalformedAssignment(
                        f"metric of {decl.name!r} is not symmetric at ({coords[i]},{coords[j]})"
                    )
                entries.append((coords[i], coords[j], rows[i][j]))
    return ConfigSpace(tuple(coords), tuple(entries), frozenset(params))


def build(sf: SystemFile) -> Environment:
    env = Environment()
    for d in sf.decls:
        if isinstance(d, ParamDecl):
            env.declare(d.name, d)
            env.param_names.append(d.name)
            if d.value is not None:
                env.params[d.name] = d.value
        elif isinstance(d, SpaceDecl):
            env.declare(d.name, _build_space(d, env.param_names))
        elif isinstance(d, MapDecl):
            source = env.lookup(d.source)
            target = env.lookup(d.target)
            if not isinstance(source, (PhaseSpace, ConfigSpace)) or not isinstance(target, (PhaseSpace, ConfigSpace)):
                raise UndeclaredIdentifier(f"map {d.name!r} must join two declared spaces")
            env.declare(d.name, SmoothMap(source, target, dict(d.assigns)))
        elif isinstance(d, SystemDecl):
            left = env.lookup(d.left_map)
            right = env.lookup(d.right_map)
            apex = env.lookup(d.apex)
            if not isinstance(left, SmoothMap) or not isinstance(right, SmoothMap):
                raise UndeclaredIdentifier(f"system {d.name!r} span legs must be declared maps")
            if left.source != apex or right.source != apex:
                raise MalformedAssignment(f"system {d.name!r}: both legs must start at apex {d.apex!r}")
            span = Span(left, right)
            if d.kind == "ham_system":
                if not isinstance(apex, PhaseSpace):
                    raise MalformedAssignment(f"ham_system {d.name!r} needs a phase_space apex")
                system = hamsy.OpenHamiltonianSystem(span, d.decoration)
            else:
                if not isinstance(apex, ConfigSpace):
                    raise MalformedAssignment(f"lag_system {d.name!r} needs a config_space apex")
                system = lagsy.OpenLagrangianSystem(span, d.decoration)
            env.declare(d.name, system)
            env.system_decls[d.name] = d
        elif isinstance(d, ComposeAction):
            a = env.lookup(d.left)
            b = env.lookup(d.right)
            if isinstance(a, hamsy.OpenHamiltonianSystem) and isinstance(b, hamsy.OpenHamiltonianSystem):
                env.declare(d.name, hamsy.compose(a, b))
            elif isinstance(a, lagsy.OpenLagrangianSystem) and isinstance(b, lagsy.OpenLagrangianSystem):
                env.declare(d.name, lagsy.compose(a, b))
                env.lag_compositions[d.name] = (d.left, d.right)
            else:
                raise MalformedAssignment(f"compose {d.name!r} needs two systems of the same kind")
            env.compose_actions.append(d)
        elif isinstance(d, TensorAction):
            a = env.lookup(d.left)
            b = env.lookup(d.right)
            if not (isinstance(a, hamsy.OpenHamiltonianSystem) and isinstance(b, hamsy.OpenHamiltonianSystem)):
                raise MalformedAssignment(f"tensor {d.name!r} needs two Hamiltonian systems")
            env.declare(d.name, hamsy.tensor(a, b))
            env.compose_actions.append(d)
        elif isinstance(d, LegendreAction):
            src = env.lookup(d.source)
            if not isinstance(src, lagsy.OpenLagrangianSystem):
                raise MalformedAssignment(f"legendre {d.name!r} needs a Lagrangian system")
            env.declare(d.name, legendre.to_hamiltonian(src))
            env.legendre_actions.append(d)
        elif isinstance(d, SimulateAction):
            env.lookup(d.target)
            env.simulate_actions.append(d)
        else:
            raise TypeError(f"unknown declaration {d!r}")
    return env


# ---------------------------------------------------------------------------
# Reports


def _describe_phase(space: PhaseSpace, out: list[str]):
    for p in space.pairs:
        out.append(f"pair {p.q} {p.p} coeff {_num(p.coeff)}")


def _describe_config(space: ConfigSpace, out: list[str]):
    for c in space.coords:
        out.append(f"coord {c}")
    for u, v, e in space.metric:
        out.append(f"metric {u} {v}: {format_expression(e)}")


def _system_of(obj):
    return obj.ham if isinstance(obj, legendre.LegendreResult) else obj


def cmd_check(env: Environment, args) -> int:
    failed = False
    out = []
    for name, decl in env.system_decls.items():
        system = env.objects[name]
        out.append(f"system: {name}")
        for legname in (decl.left_map, decl.right_map):
            report = validate_leg(
                env.objects[legname], n=args.samples, tol=args.tol, seed=args.seed,
                convention=args.shared_pair_bivector,
            )
            out.append(f"leg {legname}: {report}")
            if not report.ok:
                failed = True
        if isinstance(system, hamsy.OpenHamiltonianSystem) and system.apex.pairs:
            pair = system.apex.pairs[0]
            space = system.apex
            box = {c: (-1.0, 1.0) for c in space.coords}
            for p in sorted(system.H.free_vars() - set(space.coords)):
                box[p] = (0.5, 1.5)
            from .expr import Var

            vq, vp = Var(pair.q), Var(pair.p)
            anti = poisson_bracket(system.H, vq, space, args.shared_pair_bivector) + poisson_bracket(
                vq, system.H, space, args.shared_pair_bivector
            )
            worst = 0.0
            from .sampling import sample_points

            for point in sample_points(box, args.samples, args.seed):
                worst = max(worst, abs(anti.eval(point)))
            out.append(f"bracket antisym(H,{pair.q}): {_num(worst)}")
            res = jacobi_residual(system.H, vq, vp, space, box, args.samples, args.seed,
                                  args.shared_pair_bivector)
            out.append(f"bracket jacobi(H,{pair.q},{pair.p}): {_num(res)}")
    out.append("result: " + ("FAILED" if failed else "ok"))
    print("\n".join(out))
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_compose(env: Environment, args) -> int:
    out = []
    for action in env.compose_actions:
        obj = env.objects[action.name]
        verb = "tensor" if isinstance(action, TensorAction) else "compose"
        if isinstance(obj, hamsy.OpenHamiltonianSystem):
            out.append(f"{verb} {action.name}: dim {obj.apex.dim}")
            _describe_phase(obj.apex, out)
            out.append(f"H: {format_expression(obj.H)}")
        else:
            out.append(f"{verb} {action.name}: dim {obj.apex.dim}")
            _describe_config(obj.apex, out)
            out.append(f"V: {format_expression(obj.V)}")
    if not out:
        out.append("result: nothing to compose")
    print("\n".join(out))
    return EXIT_OK


def cmd_legendre(env: Environment, args) -> int:
    out = []
    for action in env.legendre_actions:
        result = env.objects[action.name]
        assert isinstance(result, legendre.LegendreResult)
        if result.ham is None:
            out.append(f"legendre {action.name}: no closed form (numeric evaluation only)")
            continue
        out.append(f"legendre {action.name}: dim {result.ham.apex.dim}")
        _describe_phase(result.ham.apex, out)
        out.append(f"H: {format_expression(result.ham.H)}")
        for pname, e in result.momentum_map:
            out.append(f"momentum {pname}: {format_expression(e)}")
        if args.discrepancy and action.source in env.lag_compositions:
            a_name, b_name = env.lag_compositions[action.source]
            value = legendre.functor_discrepancy(
                env.objects[a_name], env.objects[b_name], n=args.samples, seed=args.seed
            )
            out.append(f"discrepancy {action.name}: {_num(value)}")
    if not out:
        out.append("result: nothing to transform")
    print("\n".join(out))
    return EXIT_OK


def cmd_simulate(env: Environment, args) -> int:
    out = []
    used_names: dict[str, int] = {}
    for action in env.simulate_actions:
        target = _system_of(env.objects[action.target])
        if target is None:
            raise SingularMetric(f"simulate {action.target!r}: no closed-form Hamiltonian")
        s = action.settings
        dt = args.dt if args.dt is not None else s.dt
        t_end = args.t_end if args.t_end is not None else s.t_end
        method = args.method if args.method is not None else (s.method or "rk4")
        if dt is None or t_end is None:
            raise MalformedAssignment(f"simulate {action.target!r}: dt and t_end must be set (file or flags)")
        cfg = dynamics.IntegratorConfig(dt=dt, t_end=t_end, method=method, params=env.params)
        init = {name: value for name, value in s.inits}
        monitors = {name: e for name, e in s.monitors}
        boundary = {}
        for name, e in s.drives:
            def fn(t, _e=e):
                return _e.eval({"t": t, **env.params})

            boundary[name] = fn
        trajectory = dynamics.simulate(
            target, init, cfg, boundary=boundary or None, monitors=monitors,
            convention=args.shared_pair_bivector,
        )
        count = used_names.get(action.target, 0)
        used_names[action.target] = count + 1
        default_name = action.target + ("" if count == 0 else f"_{count + 1}") + ".csv"
        path = args.out if args.out else default_name
        dynamics.write_csv(trajectory, path)
        out.append(f"simulate {action.target}: steps {len(trajectory.times) - 1} dt {_num(dt)} method {method}")
        out.append(f"energy_drift: {_num(dynamics.energy_drift(trajectory, target.H))}")
        for name, e in monitors.items():
            out.append(f"conserved {name}: residual {_num(dynamics.conserved_residual(trajectory, e))}")
        out.append(f"csv: {path}")
    if not out:
        out.append("result: nothing to simulate")
    print("\n".join(out))
    return EXIT_OK


_BUILTIN_SPACE = re.compile(r"R(\d+)$")


def cmd_bracket(args) -> int:
    space = None
    if args.file:
        env = build(parse(open(args.file).read()))
        obj = env.objects.get(args.space)
        if isinstance(obj, PhaseSpace):
            space = obj
    if space is None:
        m = _BUILTIN_SPACE.match(args.space)
        if not m or int(m.group(1)) % 2 != 0 or int(m.group(1)) == 0:
            raise UndeclaredIdentifier(
                f"space {args.space!r} not declared (builtin spaces are R2, R4, ...)"
            )
        from .geometry import standard_space

        space = standard_space(int(m.group(1)) // 2)
    from .expr import parse_expression

    f = parse_expression(args.f)
    g = parse_expression(args.g)
    print(format_expression(poisson_bracket(f, g, space, args.shared_pair_bivector)))
    return EXIT_OK


def _common_flags(sub):
    sub.add_argument("--seed", type=int, default=42)
    sub.add_argument("--tol", type=float, default=1e-9)
    sub.add_argument("--samples", type=int, default=100)
    sub.add_argument("--shared-pair-bivector", choices=("inverse", "paper"), default="inverse")


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="open-mech", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    for name in ("check", "compose"):
        sub = subs.add_parser(name)
        sub.add_argument("file")
        _common_flags(sub)

    sub = subs.add_parser("legendre")
    sub.add_argument("file")
    sub.add_argument("--discrepancy", action="store_true",
                     help="also report the transform-order discrepancy for composed sources")
    _common_flags(sub)

    sub = subs.add_parser("simulate")
    sub.add_argument("file")
    sub.add_argument("--dt", type=float, default=None)
    sub.add_argument("--t-end", type=float, default=None)
    sub.add_argument("--method", choices=dynamics.METHODS, default=None)
    sub.add_argument("--out", default=None)
    _common_flags(sub)

    sub = subs.add_parser("bracket")
    sub.add_argument("f")
    sub.add_argument("g")
    sub.add_argument("--space", required=True)
    sub.add_argument("--file", default=None)
    _common_flags(sub)
    return parser


def main(argv=None) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "bracket":
            return cmd_bracket(args)
        try:
            text = open(args.file).read()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        env = build(parse(text))
        if args.command == "check":
            return cmd_check(env, args)
        if args.command == "compose":
            return cmd_compose(env, args)
        if args.command == "legendre":
            return cmd_legendre(env, args)
        return cmd_simulate(env, args)
    except (ParseError, UndeclaredIdentifier, DuplicateDeclaration, MalformedAssignment,
            UnknownCoordinate, NonProjectionLeg, FootMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, UnboundVariable, SingularMetric, NonSeparable) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
