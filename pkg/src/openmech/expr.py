"""Immutable symbolic expression trees.

This is the function representation everything else decorates spaces with:
Hamiltonians, potentials, map components, metric entries.  The node set is
deliberately closed-form — constants, variables, negation, n-ary sums and
products, quotients, integer powers, sin, cos, sqrt — which covers every
energy function this package works with while keeping the rewriter small
enough to be obviously correct.

Simplification is constant folding plus flattening of nested sums/products,
nothing else.  There is no canonical form; semantic equality questions are
answered by `equal_on_samples`, which compares values at deterministic
pseudo-random points (see `sampling`).

Construction goes through the builder functions (`add`, `mul`, `div`,
`pow_int`, ...) or the overloaded operators, both of which fold eagerly, so
any tree obtained from the public surface is already folded.  Expressions
are immutable and hashable; every operation here is a pure function.

Surface syntax (shared with the `.osys` DSL): infix with precedence
`^` > unary `-` > `*`,`/` > `+`,`-`; parentheses; calls `sin(x)`, `cos(x)`,
`sqrt(x)`; names match [A-Za-z_][A-Za-z0-9_]*.  Exponents are integer
literals (optionally signed).
"""

from __future__ import annotations

import math
import re
from typing import Iterable, Mapping

from .errors import DomainError, ParseError, UnboundVariable
from .sampling import Box, sample_points

Binding = Mapping[str, float]


def _coerce(value) -> "Expr":
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    raise TypeError(f"cannot treat {value!r} as an expression")


class Expr:
    """Base node. Subclasses define eval/diff/substitute; operators fold."""

    __slots__ = ()

    def eval(self, binding: Binding) -> float:
        raise NotImplementedError

    def diff(self, name: str) -> "Expr":
        raise NotImplementedError

    def substitute(self, mapping: Mapping[str, "Expr"]) -> "Expr":
        """Simultaneous substitution: replacements are not re-substituted."""
        raise NotImplementedError

    def free_vars(self) -> frozenset[str]:
        raise NotImplementedError

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, exponent):
        return pow_int(self, exponent)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return format_expression(self)

    def __repr__(self):
        return f"<{format_expression(self)}>"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        object.__setattr__(self, "value", float(value))

    def __setattr__(self, *_):
        raise AttributeError("expressions are immutable")

    def eval(self, binding):
        return self.value

    def diff(self, name):
        return _ZERO

    def substitute(self, mapping):
        return self

    def free_vars(self):
        return frozenset()

    def __eq__(self, other):
        return isinstance(other, Const) and (
            self.value == other.value
            or (math.isnan(self.value) and math.isnan(other.value))
        )

    def __hash__(self):
        return hash(("const", self.value))


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if not _NAME_RE.fullmatch(name):
            raise ValueError(f"invalid variable name {name!r}")
        object.__setattr__(self, "name", name)

    def __setattr__(self, *_):
        raise AttributeError("expressions are immutable")

    def eval(self, binding):
        try:
            return float(binding[self.name])
        except KeyError:
            raise UnboundVariable(self.name) from None

    def diff(self, name):
        return _ONE if name == self.name else _ZERO

    def substitute(self, mapping):
        return mapping.get(self.name, self)

    def free_vars(self):
        return frozenset((self.name,))

    def __eq__(self, other):
        return isinstance(other, Var) and self.name == other.name

    def __hash__(self):
        return hash(("var", self.name))


class _Composite(Expr):
    """Shared plumbing for nodes with child expressions."""

    __slots__ = ("args",)

    def __init__(self, args: tuple[Expr, ...]):
        object.__setattr__(self, "args", args)

    def __setattr__(self, *_):
        raise AttributeError("expressions are immutable")

    def free_vars(self):
        out = frozenset()
        for a in self.args:
            out |= a.free_vars()
        return out

    def __eq__(self, other):
        return type(self) is type(other) and self.args == other.args

    def __hash__(self):
        return hash((type(self).__name__, self.args))


class Neg(_Composite):
    __slots__ = ()

    def eval(self, binding):
        return -self.args[0].eval(binding)

    def diff(self, name):
        return neg(self.args[0].diff(name))

    def substitute(self, mapping):
        return neg(self.args[0].substitute(mapping))


class Add(_Composite):
    __slots__ = ()

    def eval(self, binding):
        total = 0.0
        for a in self.args:
            total += a.eval(binding)
        return total

    def diff(self, name):
        return add(*(a.diff(name) for a in self.args))

    def substitute(self, mapping):
        return add(*(a.substitute(mapping) for a in self.args))


class Mul(_Composite):
    __slots__ = ()

    def eval(self, binding):
        total = 1.0
        for a in self.args:
            total *= a.eval(binding)
        return total

    def diff(self, name):
        terms = []
        for i, a in enumerate(self.args):
            factors = list(self.args)
            factors[i] = a.diff(name)
            terms.append(mul(*factors))
        return add(*terms)

    def substitute(self, mapping):
        return mul(*(a.substitute(mapping) for a in self.args))


class Div(_Composite):
    __slots__ = ()

    def eval(self, binding):
        num = self.args[0].eval(binding)
        den = self.args[1].eval(binding)
        if den == 0.0:
            raise DomainError(f"division by zero in {self}")
        return num / den

    def diff(self, name):
        u, v = self.args
        return div(add(mul(u.diff(name), v), neg(mul(u, v.diff(name)))), pow_int(v, 2))

    def substitute(self, mapping):
        return div(self.args[0].substitute(mapping), self.args[1].substitute(mapping))


class Pow(Expr):
    """Integer power. The exponent is data, not a child expression."""

    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: int):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", int(exponent))

    def __setattr__(self, *_):
        raise AttributeError("expressions are immutable")

    def eval(self, binding):
        b = self.base.eval(binding)
        if b == 0.0 and self.exponent < 0:
            raise DomainError(f"zero raised to negative power in {self}")
        try:
            return float(b**self.exponent)
        except OverflowError:
            raise DomainError(f"overflow in {self}") from None

    def diff(self, name):
        return mul(float(self.exponent), pow_int(self.base, self.exponent - 1), self.base.diff(name))

    def substitute(self, mapping):
        return pow_int(self.base.substitute(mapping), self.exponent)

    def free_vars(self):
        return self.base.free_vars()

    def __eq__(self, other):
        return isinstance(other, Pow) and self.exponent == other.exponent and self.base == other.base

    def __hash__(self):
        return hash(("pow", self.base, self.exponent))


class _Fn(_Composite):
    __slots__ = ()
    fname = ""

    def substitute(self, mapping):
        return _FN_BUILDERS[self.fname](self.args[0].substitute(mapping))


class Sin(_Fn):
    __slots__ = ()
    fname = "sin"

    def eval(self, binding):
        return math.sin(self.args[0].eval(binding))

    def diff(self, name):
        return mul(cos(self.args[0]), self.args[0].diff(name))


class Cos(_Fn):
    __slots__ = ()
    fname = "cos"

    def eval(self, binding):
        return math.cos(self.args[0].eval(binding))

    def diff(self, name):
        return neg(mul(sin(self.args[0]), self.args[0].diff(name)))


class Sqrt(_Fn):
    __slots__ = ()
    fname = "sqrt"

    def eval(self, binding):
        v = self.args[0].eval(binding)
        if v < 0.0:
            raise DomainError(f"sqrt of negative value in {self}")
        return math.sqrt(v)

    def diff(self, name):
        return div(self.args[0].diff(name), mul(2.0, sqrt(self.args[0])))


_ZERO = Const(0.0)
_ONE = Const(1.0)
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


# ---------------------------------------------------------------------------
# Folding builders.


def add(*parts) -> Expr:
    """Sum; flattens nested sums, folds constants (constant kept first)."""
    flat: list[Expr] = []
    csum = 0.0
    for p in parts:
        p = _coerce(p)
        if isinstance(p, Add):
            children = p.args
        else:
            children = (p,)
        for c in children:
            if isinstance(c, Const):
                csum += c.value
            else:
                flat.append(c)
    if csum != 0.0 or not flat:
        flat.insert(0, Const(csum))
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(*parts) -> Expr:
    """Product; flattens nested products, folds constants (constant kept first)."""
    flat: list[Expr] = []
    cprod = 1.0
    for p in parts:
        p = _coerce(p)
        if isinstance(p, Mul):
            children = p.args
        else:
            children = (p,)
        for c in children:
            if isinstance(c, Const):
                cprod *= c.value
            else:
                flat.append(c)
    if cprod == 0.0:
        return Const(0.0)
    if cprod != 1.0 or not flat:
        flat.insert(0, Const(cprod))
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def neg(part) -> Expr:
    part = _coerce(part)
    if isinstance(part, Const):
        return Const(-part.value)
    if isinstance(part, Neg):
        return part.args[0]
    return Neg((part,))


def div(num, den) -> Expr:
    num = _coerce(num)
    den = _coerce(den)
    if isinstance(den, Const):
        if den.value == 1.0:
            return num
        if isinstance(num, Const) and den.value != 0.0:
            return Const(num.value / den.value)
    return Div((num, den))


def pow_int(base, exponent: int) -> Expr:
    base = _coerce(base)
    exponent = int(exponent)
    if exponent == 0:
        return _ONE
    if exponent == 1:
        return base
    if isinstance(base, Const) and not (base.value == 0.0 and exponent < 0):
        return Const(float(base.value**exponent))
    return Pow(base, exponent)


def sin(part) -> Expr:
    part = _coerce(part)
    if isinstance(part, Const):
        return Const(math.sin(part.value))
    return Sin((part,))


def cos(part) -> Expr:
    part = _coerce(part)
    if isinstance(part, Const):
        return Const(math.cos(part.value))
    return Cos((part,))


def sqrt(part) -> Expr:
    part = _coerce(part)
    if isinstance(part, Const) and part.value >= 0.0:
        return Const(math.sqrt(part.value))
    return Sqrt((part,))


_FN_BUILDERS = {"sin": sin, "cos": cos, "sqrt": sqrt}


def fold(e: Expr) -> Expr:
    """Rebuild through the builders. Identity on anything they produced."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Neg):
        return neg(fold(e.args[0]))
    if isinstance(e, Add):
        return add(*(fold(a) for a in e.args))
    if isinstance(e, Mul):
        return mul(*(fold(a) for a in e.args))
    if isinstance(e, Div):
        return div(fold(e.args[0]), fold(e.args[1]))
    if isinstance(e, Pow):
        return pow_int(fold(e.base), e.exponent)
    if isinstance(e, _Fn):
        return _FN_BUILDERS[e.fname](fold(e.args[0]))
    raise TypeError(f"not an expression: {e!r}")


def equal_on_samples(
    e1: Expr,
    e2: Expr,
    box: Box,
    n: int = 100,
    tol: float = 1e-9,
    seed: int = 42,
) -> bool:
    """Numerically indistinguishable at n seeded sample points in the box.

    True iff |e1 - e2| <= tol * (1 + max(|e1|, |e2|)) at every point.  Both
    expressions' free variables must be covered by the box.  DomainError
    from either side propagates.
    """
    missing = (e1.free_vars() | e2.free_vars()) - set(box)
    if missing:
        raise ValueError(f"box does not cover variables: {sorted(missing)}")
    for point in sample_points(box, n, seed):
        v1 = e1.eval(point)
        v2 = e2.eval(point)
        if abs(v1 - v2) > tol * (1.0 + max(abs(v1), abs(v2))):
            return False
    return True


# ---------------------------------------------------------------------------
# Surface syntax: tokenizer shared with the .osys DSL, plus the expression
# grammar itself.

# Two-character symbols first so "->" is not read as "-", ">".
_SYMBOLS = ("->", "(", ")", "{", "}", "[", "]", "+", "-", "*", "/", "^", "=", ":", ";", ",")
_NUMBER_RE = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind  # "name" | "number" | "sym" | "end"
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Token({self.kind},{self.text!r}@{self.line}:{self.col})"


def tokenize(text: str) -> list[Token]:
    """Whitespace-insensitive tokens with positions; '#' starts a line comment."""
    tokens = []
    i, line, col = 0, 1, 1
    size = len(text)
    while i < size:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < size and text[i] != "\n":
                i += 1
            continue
        m = _NUMBER_RE.match(text, i)
        if m:
            tokens.append(Token("number", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _NAME_RE.match(text, i)
        if m:
            tokens.append(Token("name", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(line, col, ("a token",), found=ch)
    tokens.append(Token("end", "", line, col))
    return tokens


class ExprParser:
    """Precedence-climbing parser over a token stream.

    Usable standalone (`parse_expression`) or embedded in the DSL parser: it
    consumes exactly one expression and leaves the position on the first
    token that cannot extend it.
    """

    def __init__(self, tokens: list[Token], pos: int = 0):
        self.tokens = tokens
        self.pos = pos

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def _fail(self, expected):
        t = self.peek()
        raise ParseError(t.line, t.col, expected, found=t.text or "end of input")

    def expression(self) -> Expr:
        e = self._term()
        while self.peek().kind == "sym" and self.peek().text in ("+", "-"):
            op = self.peek().text
            self.pos += 1
            rhs = self._term()
            e = add(e, rhs) if op == "+" else add(e, neg(rhs))
        return e

    def _term(self) -> Expr:
        e = self._unary()
        while self.peek().kind == "sym" and self.peek().text in ("*", "/"):
            op = self.peek().text
            self.pos += 1
            rhs = self._unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def _unary(self) -> Expr:
        if self.peek().kind == "sym" and self.peek().text == "-":
            self.pos += 1
            return neg(self._unary())
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        if self.peek().kind == "sym" and self.peek().text == "^":
            self.pos += 1
            return pow_int(base, self._int_literal())
        return base

    def _int_literal(self) -> int:
        sign = 1
        if self.peek().kind == "sym" and self.peek().text == "-":
            sign = -1
            self.pos += 1
        t = self.peek()
        if t.kind != "number" or not re.fullmatch(r"\d+", t.text):
            self._fail(("an integer exponent",))
        self.pos += 1
        return sign * int(t.text)

    def _atom(self) -> Expr:
        t = self.peek()
        if t.kind == "number":
            self.pos += 1
            return Const(float(t.text))
        if t.kind == "name":
            self.pos += 1
            nxt = self.peek()
            if nxt.kind == "sym" and nxt.text == "(":
                if t.text not in _FN_BUILDERS:
                    raise ParseError(t.line, t.col, ("sin", "cos", "sqrt"), found=t.text)
                self.pos += 1
                arg = self.expression()
                self._expect_sym(")")
                return _FN_BUILDERS[t.text](arg)
            return Var(t.text)
        if t.kind == "sym" and t.text == "(":
            self.pos += 1
            e = self.expression()
            self._expect_sym(")")
            return e
        self._fail(("a number", "a name", "'('"))

    def _expect_sym(self, sym):
        t = self.peek()
        if t.kind != "sym" or t.text != sym:
            self._fail((f"'{sym}'",))
        self.pos += 1


def parse_expression(text: str) -> Expr:
    parser = ExprParser(tokenize(text))
    e = parser.expression()
    t = parser.peek()
    if t.kind != "end":
        raise ParseError(t.line, t.col, ("end of expression",), found=t.text)
    return e


# Precedence levels used by the printer: larger binds tighter.
_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt(e: Expr, ctx: int) -> str:
    if isinstance(e, Const):
        v = e.value
        if v == int(v) and abs(v) < 1e16:
            s = str(int(v))
        else:
            s = repr(v)
        if v < 0 and ctx > _PREC_ADD:
            return f"({s})"
        return s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        parts = [_fmt(e.args[0], _PREC_ADD)]
        for a in e.args[1:]:
            if isinstance(a, Neg):
                parts.append(f" - {_fmt(a.args[0], _PREC_MUL)}")
            elif isinstance(a, Const) and a.value < 0:
                parts.append(f" - {_fmt(Const(-a.value), _PREC_MUL)}")
            else:
                parts.append(f" + {_fmt(a, _PREC_ADD)}")
        s = "".join(parts)
        return f"({s})" if ctx > _PREC_ADD else s
    if isinstance(e, Neg):
        s = f"-{_fmt(e.args[0], _PREC_UNARY)}"
        return f"({s})" if ctx > _PREC_UNARY else s
    if isinstance(e, Mul):
        s = "*".join(_fmt(a, _PREC_MUL + 1) for a in e.args)
        return f"({s})" if ctx > _PREC_MUL else s
    if isinstance(e, Div):
        s = f"{_fmt(e.args[0], _PREC_MUL + 1)}/{_fmt(e.args[1], _PREC_MUL + 1)}"
        return f"({s})" if ctx > _PREC_MUL else s
    if isinstance(e, Pow):
        s = f"{_fmt(e.base, _PREC_ATOM)}^{e.exponent}"
        return f"({s})" if ctx > _PREC_POW else s
    if isinstance(e, _Fn):
        return f"{e.fname}({_fmt(e.args[0], _PREC_ADD)})"
    raise TypeError(f"not an expression: {e!r}")


def format_expression(e: Expr) -> str:
    """Deterministic infix rendering; reparses to a structurally equal tree."""
    return _fmt(e, _PREC_ADD)


def variables(names: str | Iterable[str]) -> list[Var]:
    """Convenience: variables("q p") or variables(["q", "p"])."""
    if isinstance(names, str):
        names = names.split()
    return [Var(n) for n in names]
