"""Symbolic scalar expressions in the coordinates (x, y, u, v).

Trees are immutable.  Parsing produces the raw syntax tree; the smart
constructors (:func:`add`, :func:`mul`, ...) and :func:`simplify` apply a
deliberately shallow set of rewrites (constant folding, neutral and
annihilating elements, merging structurally identical terms).  Derivatives
are exact rewrites and definite integrals are first-class nodes evaluated by
composite Simpson quadrature.
"""

from __future__ import annotations

import math
import re
from typing import Iterable, Mapping, Sequence

import numpy as np

COORDS = ("x", "y", "u", "v")
FUNCTIONS = ("sin", "cos", "exp", "log")
RESERVED = frozenset(COORDS + FUNCTIONS + ("int",))

DEFAULT_PANELS = 256
# panel counts refer to this interval length (the default domain [-1, 1])
QUADRATURE_SPAN = 2.0
# upper bound on the number of points a single quadrature expansion touches at once
_MAX_BATCH = 1 << 19


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, column: int, text: str = ""):
        self.column = column
        self.text = text
        super().__init__(f"{message} at column {column}")


class EvaluationError(ExprError):
    pass


class UnboundParameterError(EvaluationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound parameter {name!r}")


class DomainError(EvaluationError):
    def __init__(self, message: str, subexpr: "Expr", point=None):
        self.subexpr = subexpr
        self.point = point
        where = "" if point is None else f" at {tuple(float(c) for c in point)}"
        super().__init__(f"{message} in {subexpr}{where}")


# ---------------------------------------------------------------------------
# nodes


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("_hash", "free", "params", "_dcache")

    def _init(self, key, free: frozenset, params: frozenset) -> None:
        self._hash = hash(key)
        self.free = free  # coordinate and bound-variable names
        self.params = params
        self._dcache = {}

    def children(self) -> tuple["Expr", ...]:
        return ()

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._key() == other._key()

    def _key(self):
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"Expr({to_string(self)!r})"

    def __str__(self) -> str:
        return to_string(self)

    # arithmetic sugar builds simplified trees
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

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

    def __pow__(self, other):
        return power(self, other)

    def __rpow__(self, other):
        return power(other, self)

    def __neg__(self):
        return neg(self)

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0.0


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)
        self._init(("c", self.value), frozenset(), frozenset())

    def _key(self):
        return self.value


class Coord(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if name not in COORDS:
            raise ValueError(f"not a coordinate: {name!r}")
        self.name = name
        self._init(("x", name), frozenset((name,)), frozenset())

    @property
    def index(self) -> int:
        return COORDS.index(self.name)

    def _key(self):
        return self.name


class Param(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._init(("p", name), frozenset(), frozenset((name,)))

    def _key(self):
        return self.name


class Dummy(Expr):
    """Integration variable bound by an enclosing :class:`Integral`."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._init(("d", name), frozenset((name,)), frozenset())

    def _key(self):
        return self.name


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: Sequence[Expr]):
        self.terms = tuple(terms)
        self._init(("+",) + self.terms, _union(t.free for t in self.terms),
                   _union(t.params for t in self.terms))

    def children(self):
        return self.terms

    def _key(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: Sequence[Expr]):
        self.factors = tuple(factors)
        self._init(("*",) + self.factors, _union(t.free for t in self.factors),
                   _union(t.params for t in self.factors))

    def children(self):
        return self.factors

    def _key(self):
        return self.factors


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr):
        self.num, self.den = num, den
        self._init(("/", num, den), num.free | den.free, num.params | den.params)

    def children(self):
        return (self.num, self.den)

    def _key(self):
        return (self.num, self.den)


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: Expr):
        self.base, self.exp = base, exp
        self._init(("^", base, exp), base.free | exp.free, base.params | exp.params)

    def children(self):
        return (self.base, self.exp)

    def _key(self):
        return (self.base, self.exp)


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg
        self._init(("neg", arg), arg.free, arg.params)

    def children(self):
        return (self.arg,)

    def _key(self):
        return self.arg


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name, self.arg = name, arg
        self._init(("f", name, arg), arg.free, arg.params)

    def children(self):
        return (self.arg,)

    def _key(self):
        return (self.name, self.arg)


class Integral(Expr):
    """Definite integral of ``body`` over the bound variable ``var`` from ``lo`` to ``hi``.

    Evaluated by composite Simpson on the lattice lo + k P with
    P = 2 * QUADRATURE_SPAN / panels, closed by one shorter piece ending at
    ``hi``.  Over a range of QUADRATURE_SPAN this is the ordinary rule with
    ``panels`` subintervals; the value at a point never depends on which
    other points are evaluated alongside it.
    """

    __slots__ = ("body", "var", "lo", "hi", "panels")

    def __init__(self, body: Expr, var: str, lo: Expr, hi: Expr, panels: int = DEFAULT_PANELS):
        if var in RESERVED:
            raise ValueError(f"integration variable may not be reserved name {var!r}")
        panels = int(panels)
        if panels < 2 or panels % 2:
            raise ValueError("Simpson quadrature needs a positive even panel count")
        self.body, self.var, self.lo, self.hi, self.panels = body, var, lo, hi, panels
        free = (body.free - {var}) | lo.free | hi.free
        self._init(("int", body, var, lo, hi, panels), free,
                   body.params | lo.params | hi.params)

    def children(self):
        return (self.body, self.lo, self.hi)

    def _key(self):
        return (self.body, self.var, self.lo, self.hi, self.panels)


def _union(sets: Iterable[frozenset]) -> frozenset:
    out = frozenset()
    for s in sets:
        out = out | s
    return out


ZERO = Const(0.0)
ONE = Const(1.0)
X, Y, U, V = (Coord(c) for c in COORDS)


def coord(name: str) -> Coord:
    return (X, Y, U, V)[COORDS.index(name)]


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Const(float(value))
    if isinstance(value, str):
        return parse_expr(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


# ---------------------------------------------------------------------------
# smart constructors


def _split_coeff(e: Expr, fold: bool = False) -> tuple[float, Expr]:
    """``(c, rest)`` with e = c * rest.

    ``fold=True`` first normalises products through :func:`mul`, so raw
    parsed forms such as (-K^2)*u^2 or y*x collect with their canonical
    equivalents; the printer leaves trees as they are.
    """
    if isinstance(e, Const):
        return e.value, ONE
    if fold and isinstance(e, Mul):
        e = mul(*e.factors)
        if not isinstance(e, Mul):
            return _split_coeff(e, fold)
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        rest = e.factors[1:]
        return e.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    if isinstance(e, Neg):
        c, r = _split_coeff(e.arg, fold)
        return -c, r
    return 1.0, e


def add(*terms) -> Expr:
    flat: list[Expr] = []
    for t in terms:
        t = as_expr(t)
        if isinstance(t, Add):
            flat.extend(t.terms)
        else:
            flat.append(t)
    const = 0.0
    coeffs: dict[Expr, float] = {}
    for t in flat:
        if isinstance(t, Const):
            const += t.value
            continue
        c, rest = _split_coeff(t, fold=True)
        coeffs[rest] = coeffs.get(rest, 0.0) + c
    out = [_with_coeff(c, r) for r, c in coeffs.items() if c != 0.0]
    if const != 0.0:
        out.append(Const(const))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Add(out)


def _with_coeff(c: float, rest: Expr) -> Expr:
    if rest is ONE or rest == ONE:
        return Const(c)
    if c == 1.0:
        return rest
    if isinstance(rest, Mul):
        return Mul((Const(c),) + rest.factors)
    return Mul((Const(c), rest))


def mul(*factors) -> Expr:
    const = 1.0
    out: list[Expr] = []
    stack = [as_expr(f) for f in factors]
    while stack:
        f = stack.pop(0)
        if isinstance(f, Const):
            const *= f.value
        elif isinstance(f, Mul):
            stack[0:0] = list(f.factors)
        elif isinstance(f, Neg):
            const = -const
            stack.insert(0, f.arg)
        else:
            out.append(f)
    if const == 0.0:
        return ZERO
    out = _collect_atoms(out)
    if not out:
        return Const(const)
    if const == 1.0:
        return out[0] if len(out) == 1 else Mul(out)
    return Mul([Const(const)] + out)


def _atom_power(f: Expr):
    """``(base, exponent)`` when f is a parameter or coordinate to a positive constant power."""
    if isinstance(f, (Param, Coord)):
        return f, 1.0
    if isinstance(f, Pow) and isinstance(f.base, (Param, Coord)) and isinstance(f.exp, Const) and f.exp.value > 0:
        return f.base, f.exp.value
    return None


def _atom_rank(base: Expr) -> tuple:
    if isinstance(base, Param):
        return (0, base.name)
    return (1, str(COORDS.index(base.name)))


def _collect_atoms(factors: list[Expr]) -> list[Expr]:
    """Order parameter and coordinate factors canonically and merge equal bases."""
    powers: dict[Expr, float] = {}
    rest: list[Expr] = []
    for f in factors:
        ap = _atom_power(f)
        if ap is None:
            rest.append(f)
        else:
            powers[ap[0]] = powers.get(ap[0], 0.0) + ap[1]
    if not powers:
        return factors
    atoms = [b if p == 1.0 else Pow(b, Const(p)) for b, p in sorted(powers.items(), key=lambda kv: _atom_rank(kv[0]))]
    return atoms + rest


def neg(e) -> Expr:
    return mul(-1.0, e)


def div(num, den) -> Expr:
    num, den = as_expr(num), as_expr(den)
    if isinstance(den, Const):
        if den.value == 1.0:
            return num
        if den.value != 0.0:
            return mul(1.0 / den.value, num)
    if num.is_zero():
        return ZERO
    if num == den and isinstance(num, (Coord, Param)):
        return ONE
    return Div(num, den)


def power(base, exp) -> Expr:
    base, exp = as_expr(base), as_expr(exp)
    if isinstance(exp, Const):
        if exp.value == 0.0:
            return ONE
        if exp.value == 1.0:
            return base
        if isinstance(base, Const):
            folded = _fold_pow(base.value, exp.value)
            if folded is not None:
                return Const(folded)
    if base == ONE:
        return ONE
    return Pow(base, exp)


def _fold_pow(b: float, e: float):
    if b == 0.0 and e < 0:
        return None
    if b < 0 and not float(e).is_integer():
        return None
    try:
        r = b ** e
    except (OverflowError, ZeroDivisionError):
        return None
    return r if isinstance(r, float) and math.isfinite(r) else None


_FOLD = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log}


def func(name: str, arg) -> Expr:
    arg = as_expr(arg)
    if isinstance(arg, Const):
        if not (name == "log" and arg.value <= 0.0):
            try:
                return Const(_FOLD[name](arg.value))
            except OverflowError:
                pass
    if name == "log" and isinstance(arg, Func) and arg.name == "exp":
        return arg.arg
    return Func(name, arg)


def sin(a) -> Expr:
    return func("sin", a)


def cos(a) -> Expr:
    return func("cos", a)


def exp(a) -> Expr:
    return func("exp", a)


def log(a) -> Expr:
    return func("log", a)


def integral(body, var: str, lo, hi, panels: int = DEFAULT_PANELS) -> Expr:
    body, lo, hi = as_expr(body), as_expr(lo), as_expr(hi)
    if body.is_zero() or lo == hi:
        return ZERO
    return Integral(body, var, lo, hi, panels)


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up through the smart constructors."""
    if isinstance(e, (Const, Coord, Param, Dummy)):
        return e
    if isinstance(e, Add):
        return add(*(simplify(t) for t in e.terms))
    if isinstance(e, Mul):
        return mul(*(simplify(f) for f in e.factors))
    if isinstance(e, Neg):
        return neg(simplify(e.arg))
    if isinstance(e, Div):
        return div(simplify(e.num), simplify(e.den))
    if isinstance(e, Pow):
        return power(simplify(e.base), simplify(e.exp))
    if isinstance(e, Func):
        return func(e.name, simplify(e.arg))
    if isinstance(e, Integral):
        return integral(simplify(e.body), e.var, simplify(e.lo), simplify(e.hi), e.panels)
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# substitution and differentiation


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace coordinates, bound variables or parameters by name."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    return _subst(e, mapping)


def _subst(e: Expr, m: Mapping[str, Expr]) -> Expr:
    if not ((e.free | e.params) & m.keys()):
        return e
    if isinstance(e, (Coord, Dummy, Param)):
        return m.get(e.name, e)
    if isinstance(e, Add):
        return add(*(_subst(t, m) for t in e.terms))
    if isinstance(e, Mul):
        return mul(*(_subst(f, m) for f in e.factors))
    if isinstance(e, Neg):
        return neg(_subst(e.arg, m))
    if isinstance(e, Div):
        return div(_subst(e.num, m), _subst(e.den, m))
    if isinstance(e, Pow):
        return power(_subst(e.base, m), _subst(e.exp, m))
    if isinstance(e, Func):
        return func(e.name, _subst(e.arg, m))
    if isinstance(e, Integral):
        inner = {k: v for k, v in m.items() if k != e.var}
        return integral(_subst(e.body, inner), e.var, _subst(e.lo, m), _subst(e.hi, m), e.panels)
    raise TypeError(type(e))


def differentiate(e: Expr, c) -> Expr:
    """Exact partial derivative of ``e`` with respect to coordinate ``c``.

    ``c`` is a coordinate name or a :class:`Coord`.  Integrals follow the
    Leibniz rule: boundary terms for variable limits plus differentiation
    under the integral sign.
    """
    name = c.name if isinstance(c, Coord) else c
    if name not in COORDS:
        raise ValueError(f"not a coordinate: {name!r}")
    return _diff(e, name)


def _diff(e: Expr, c: str) -> Expr:
    if c not in e.free:
        return ZERO
    cached = e._dcache.get(c)
    if cached is not None:
        return cached
    d = _diff_rule(e, c)
    e._dcache[c] = d
    return d


def _diff_rule(e: Expr, c: str) -> Expr:
    if isinstance(e, Coord):
        return ONE
    if isinstance(e, Add):
        return add(*(_diff(t, c) for t in e.terms))
    if isinstance(e, Mul):
        terms = []
        for i, f in enumerate(e.factors):
            df = _diff(f, c)
            if not df.is_zero():
                terms.append(mul(*e.factors[:i], df, *e.factors[i + 1:]))
        return add(*terms)
    if isinstance(e, Neg):
        return neg(_diff(e.arg, c))
    if isinstance(e, Div):
        dn, dd = _diff(e.num, c), _diff(e.den, c)
        if dd.is_zero():
            return div(dn, e.den)
        return div(add(mul(dn, e.den), neg(mul(e.num, dd))), power(e.den, 2.0))
    if isinstance(e, Pow):
        db, de = _diff(e.base, c), _diff(e.exp, c)
        if de.is_zero():
            return mul(e.exp, power(e.base, add(e.exp, -1.0)), db)
        return mul(e, add(mul(de, log(e.base)), div(mul(e.exp, db), e.base)))
    if isinstance(e, Func):
        da = _diff(e.arg, c)
        if e.name == "sin":
            return mul(cos(e.arg), da)
        if e.name == "cos":
            return neg(mul(sin(e.arg), da))
        if e.name == "exp":
            return mul(e, da)
        return div(da, e.arg)
    if isinstance(e, Integral):
        terms = [integral(_diff(e.body, c), e.var, e.lo, e.hi, e.panels)]
        dh, dl = _diff(e.hi, c), _diff(e.lo, c)
        if not dh.is_zero():
            terms.append(mul(_subst(e.body, {e.var: e.hi}), dh))
        if not dl.is_zero():
            terms.append(neg(mul(_subst(e.body, {e.var: e.lo}), dl)))
        return add(*terms)
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos, toks = 0, []
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos + 1, text)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start + 1))
        pos = m.end()
    toks.append(("end", "", n + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.bound: list[str] = []

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value: str):
        kind, val, col = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", col, self.text)

    def error(self, msg):
        raise ExprSyntaxError(msg, self.peek()[2], self.text)

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            self.error("empty expression")
        e = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else Neg(t))
        return terms[0] if len(terms) == 1 else Add(terms)

    def term(self) -> Expr:
        acc = self.factor()
        factors = [acc]
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.factor()
            if op == "*":
                factors.append(rhs)
            else:
                left = factors[0] if len(factors) == 1 else Mul(factors)
                factors = [Div(left, rhs)]
        return factors[0] if len(factors) == 1 else Mul(factors)

    def factor(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.factor())
        base = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Pow(base, self.factor())
        return base

    def base(self) -> Expr:
        kind, val, col = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            is_call = self.peek()[0] == "op" and self.peek()[1] == "("
            if val == "int":
                if not is_call:
                    raise ExprSyntaxError("'int' must be called", col, self.text)
                return self.integral()
            if val in FUNCTIONS:
                if not is_call:
                    raise ExprSyntaxError(f"function {val!r} needs an argument", col, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(val, arg)
            if is_call:
                raise ExprSyntaxError(f"unknown function {val!r}", col, self.text)
            if val in COORDS:
                return coord(val)
            if val in self.bound:
                return Dummy(val)
            return Param(val)
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", col, self.text)

    def integral(self) -> Expr:
        # int(body, var, lo, hi[, panels])
        self.expect("(")
        start = self.i
        depth = 0
        # the bound variable follows the body; scan ahead for it
        j = self.i
        while True:
            kind, val, col = self.toks[j]
            if kind == "end":
                raise ExprSyntaxError("unterminated int(...)", col, self.text)
            if val == "(" and kind == "op":
                depth += 1
            elif val == ")" and kind == "op":
                depth -= 1
            elif val == "," and kind == "op" and depth == 0:
                break
            j += 1
        kind, var, col = self.toks[j + 1]
        if kind != "name" or var in RESERVED:
            raise ExprSyntaxError("int(...) needs an integration variable name", col, self.text)
        self.i = start
        self.bound.append(var)
        body = self.expr()
        self.bound.pop()
        self.expect(",")
        self.take()
        self.expect(",")
        lo = self.expr()
        self.expect(",")
        hi = self.expr()
        panels = DEFAULT_PANELS
        if self.peek()[1] == ",":
            self.take()
            kind, val, col = self.take()
            if kind != "num" or not float(val).is_integer():
                raise ExprSyntaxError("panel count must be an integer", col, self.text)
            panels = int(float(val))
        self.expect(")")
        try:
            return Integral(body, var, lo, hi, panels)
        except ValueError as exc:
            raise ExprSyntaxError(str(exc), col, self.text) from None


def parse_expr(text: str) -> Expr:
    """Parse infix text into a raw (unsimplified) expression tree."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing

_ADD, _MUL, _UNARY, _POW, _ATOM = 1, 2, 3, 4, 5


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    return _str(e)[0]


def _wrap(e: Expr, min_prec: int) -> str:
    s, p = _str(e)
    return s if p >= min_prec else f"({s})"


def _str(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        if e.value < 0 or (e.value == 0 and math.copysign(1, e.value) < 0):
            return "-" + _fmt_number(-e.value), _UNARY
        return _fmt_number(e.value), _ATOM
    if isinstance(e, (Coord, Param, Dummy)):
        return e.name, _ATOM
    if isinstance(e, Add):
        parts = [_wrap(e.terms[0], _MUL)]
        for t in e.terms[1:]:
            if isinstance(t, Neg):
                parts.append(" - " + _wrap(t.arg, _MUL))
                continue
            c, rest = _split_coeff(t)
            if c < 0 and not isinstance(t, Neg):
                parts.append(" - " + _wrap(_with_coeff(-c, rest), _MUL))
            else:
                parts.append(" + " + _wrap(t, _MUL))
        return "".join(parts), _ADD
    if isinstance(e, Mul):
        fs = e.factors
        if isinstance(fs[0], Const) and fs[0].value == -1.0 and len(fs) > 1:
            rest = fs[1] if len(fs) == 2 else Mul(fs[1:])
            return "-" + _wrap(rest, _UNARY), _UNARY
        first = fs[0]
        head = f"({to_string(first)})" if isinstance(first, (Add, Mul)) else _wrap(first, _MUL)
        return "*".join([head] + [_wrap(f, _UNARY) for f in fs[1:]]), _MUL
    if isinstance(e, Div):
        left = f"({to_string(e.num)})" if isinstance(e.num, Add) else _wrap(e.num, _MUL)
        return f"{left}/{_wrap(e.den, _UNARY)}", _MUL
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _UNARY), _UNARY
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _ATOM)}^{_wrap(e.exp, _UNARY)}", _POW
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})", _ATOM
    if isinstance(e, Integral):
        args = [to_string(e.body), e.var, to_string(e.lo), to_string(e.hi)]
        if e.panels != DEFAULT_PANELS:
            args.append(str(e.panels))
        return f"int({', '.join(args)})", _ATOM
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# evaluation


def piece_width(panels: int) -> float:
    """Width of one Simpson piece (two panels) for a panel count over the reference span."""
    return 2.0 * QUADRATURE_SPAN / panels


class Evaluator:
    """Vectorised evaluation of expressions over a batch of points.

    ``env`` maps coordinate (and bound-variable) names to 1-D arrays of a
    common length.  Values of nodes are memoised by identity, so several
    expressions sharing subtrees can be evaluated with one evaluator.
    """

    def __init__(self, env: Mapping[str, np.ndarray], params: Mapping[str, float] | None = None):
        self.env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
        sizes = {a.shape[0] for a in self.env.values()}
        if len(sizes) > 1:
            raise ValueError("environment arrays must share one length")
        self.size = sizes.pop() if sizes else 1
        self.params = dict(params or {})
        self._memo: dict[int, tuple[Expr, np.ndarray | float]] = {}

    def __call__(self, e: Expr) -> np.ndarray:
        val = self.value(e)
        return np.broadcast_to(np.asarray(val, dtype=float), (self.size,)).copy()

    def value(self, e: Expr):
        hit = self._memo.get(id(e))
        if hit is not None:
            return hit[1]
        val = self._compute(e)
        # keep the node alive so its id stays unique for the memo's lifetime
        self._memo[id(e)] = (e, val)
        return val

    def _point(self, mask) -> tuple | None:
        idx = int(np.flatnonzero(np.broadcast_to(mask, (self.size,)))[0])
        return tuple(self.env[c][idx] if c in self.env else float("nan") for c in COORDS)

    def _compute(self, e: Expr):
        if isinstance(e, Const):
            return e.value
        if isinstance(e, (Coord, Dummy)):
            try:
                return self.env[e.name]
            except KeyError:
                raise EvaluationError(f"no value for variable {e.name!r}") from None
        if isinstance(e, Param):
            try:
                return float(self.params[e.name])
            except KeyError:
                raise UnboundParameterError(e.name) from None
        if isinstance(e, Add):
            acc = self.value(e.terms[0])
            for t in e.terms[1:]:
                acc = acc + self.value(t)
            return acc
        if isinstance(e, Mul):
            acc = self.value(e.factors[0])
            for f in e.factors[1:]:
                acc = acc * self.value(f)
            return acc
        if isinstance(e, Neg):
            return -self.value(e.arg)
        if isinstance(e, Div):
            num, den = self.value(e.num), self.value(e.den)
            bad = np.asarray(den) == 0.0
            if np.any(bad):
                raise DomainError("division by zero", e, self._point(bad))
            return num / den
        if isinstance(e, Pow):
            return self._pow(e)
        if isinstance(e, Func):
            a = self.value(e.arg)
            if e.name == "log":
                bad = np.asarray(a) <= 0.0
                if np.any(bad):
                    raise DomainError("log of non-positive value", e, self._point(bad))
                return np.log(a)
            with np.errstate(over="ignore"):
                return getattr(np, e.name)(a)
        if isinstance(e, Integral):
            return self._integral(e)
        raise TypeError(type(e))

    def _pow(self, e: Pow):
        b, p = self.value(e.base), self.value(e.exp)
        b_arr, p_arr = np.asarray(b, dtype=float), np.asarray(p, dtype=float)
        neg_frac = (b_arr < 0) & (p_arr != np.round(p_arr))
        if np.any(neg_frac):
            raise DomainError("negative base with non-integer exponent", e, self._point(neg_frac))
        zero_neg = (b_arr == 0) & (p_arr < 0)
        if np.any(zero_neg):
            raise DomainError("zero raised to a negative power", e, self._point(zero_neg))
        if isinstance(e.exp, Const) and e.exp.value == 2.0:
            return b * b
        with np.errstate(over="ignore"):
            return np.power(b_arr, p_arr)

    # -- quadrature

    def _integral(self, e: Integral):
        if e.body.free <= {e.var} and not e.lo.free:
            lo = float(np.asarray(self.value(e.lo)))
            hi = np.broadcast_to(np.asarray(self.value(e.hi), dtype=float), (self.size,))
            return self._cumulative(e, lo, hi)
        return self._pointwise(e)

    def _cumulative(self, e: Integral, lo: float, hi: np.ndarray) -> np.ndarray:
        """Integrate a one-variable body from a fixed lower limit to many upper limits.

        Full Simpson pieces on the lattice lo + k P are evaluated once on each
        side of lo and accumulated; every upper limit then adds one short
        piece from its last lattice node.
        """
        P = piece_width(e.panels)
        uniq, inverse = np.unique(hi, return_inverse=True)
        d = uniq - lo
        sgn = np.where(d < 0, -1.0, 1.0)
        m = np.floor(np.abs(d) / P).astype(np.int64)
        out = np.zeros(uniq.size)
        lattice = {}
        for side in (1.0, -1.0):
            sel = sgn == side
            if not np.any(sel):
                continue
            M = int(m[sel].max())
            k = np.arange(2 * M + 1)
            lattice[side] = (lo + side * k * (0.5 * P), M)
        tails = []
        for side, (nodes, M) in lattice.items():
            sel = np.flatnonzero(sgn == side)
            start = lo + side * m[sel] * P
            tails.append((side, sel, start))
        # one batch: both lattices, then tail midpoints and ends
        chunks = [lattice[s][0] for s in lattice]
        for side, sel, start in tails:
            chunks.append(0.5 * (start + uniq[sel]))
            chunks.append(uniq[sel])
        vals = Evaluator({e.var: np.concatenate(chunks)}, self.params)(e.body)
        pos = 0
        cums = {}
        for side, (nodes, M) in lattice.items():
            v = vals[pos:pos + nodes.size]
            pos += nodes.size
            pieces = side * (P / 6.0) * (v[0:-1:2] + 4.0 * v[1::2] + v[2::2])
            cums[side] = (np.concatenate([[0.0], np.cumsum(pieces)]), v)
        for side, sel, start in tails:
            k = sel.size
            mid, end = vals[pos:pos + k], vals[pos + k:pos + 2 * k]
            pos += 2 * k
            cum, v = cums[side]
            mm = m[sel]
            out[sel] = cum[mm] + (uniq[sel] - start) / 6.0 * (v[2 * mm] + 4.0 * mid + end)
        return out[inverse.reshape(-1)]

    def _pointwise(self, e: Integral) -> np.ndarray:
        names = sorted(e.free)
        P = piece_width(e.panels)
        if names:
            keys = np.stack([np.broadcast_to(self.env[c], (self.size,)) for c in names], axis=1)
            uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
        else:
            uniq, inverse = np.zeros((1, 0)), np.zeros(self.size, dtype=np.int64)
        outer = Evaluator({c: uniq[:, j] for j, c in enumerate(names)}, self.params)
        lo_all = np.broadcast_to(np.asarray(outer.value(e.lo), dtype=float), (uniq.shape[0],))
        hi_all = np.broadcast_to(np.asarray(outer.value(e.hi), dtype=float), (uniq.shape[0],))
        m_all = np.floor(np.abs(hi_all - lo_all) / P).astype(np.int64)
        out = np.empty(uniq.shape[0])
        width = 2 * int(m_all.max(initial=0)) + 3
        chunk = max(1, _MAX_BATCH // width)
        for start in range(0, uniq.shape[0], chunk):
            rows = uniq[start:start + chunk]
            n = rows.shape[0]
            lo, hi, m = lo_all[start:start + n], hi_all[start:start + n], m_all[start:start + n]
            M = int(m.max(initial=0))
            sgn = np.where(hi < lo, -1.0, 1.0)
            k = np.arange(2 * M + 1)
            lat = lo[:, None] + (sgn * 0.5 * P)[:, None] * k[None, :]
            used = k[None, :] <= 2 * m[:, None]
            # padded nodes are parked on the upper limit so the body stays in its domain
            lat = np.where(used, lat, hi[:, None])
            tail0 = lo + sgn * m * P
            t = np.concatenate([lat, (0.5 * (tail0 + hi))[:, None], hi[:, None]], axis=1)
            cols = t.shape[1]
            env = {c: np.repeat(rows[:, j], cols) for j, c in enumerate(names)}
            env[e.var] = t.reshape(-1)
            vals = Evaluator(env, self.params)(e.body).reshape(n, cols)
            w = np.zeros((n, 2 * M + 1))
            w[:, 1::2] = 4.0
            w[:, 2::2] = 2.0
            w[:, 0] = 1.0
            w[np.arange(n), 2 * m] = 1.0
            w = np.where(used, w, 0.0)
            w[m == 0, 0] = 0.0
            full = sgn * (P / 6.0) * np.sum(vals[:, :2 * M + 1] * w, axis=1)
            tail = (hi - tail0) / 6.0 * (vals[np.arange(n), 2 * m] + 4.0 * vals[:, -2] + vals[:, -1])
            out[start:start + n] = full + tail
        return out[inverse]


def _points_env(points) -> dict[str, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[-1] != 4:
        raise ValueError("points must have four coordinates (x, y, u, v)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return {c: arr[:, i] for i, c in enumerate(COORDS)}


def evaluate(e: Expr, point: Sequence[float], params: Mapping[str, float] | None = None) -> float:
    """Value of ``e`` at a single point ``(x, y, u, v)``."""
    return float(Evaluator(_points_env(point), params)(e)[0])


def evaluate_points(e: Expr, points, params: Mapping[str, float] | None = None) -> np.ndarray:
    """Values of ``e`` at an ``(N, 4)`` array of points."""
    return Evaluator(_points_env(points), params)(e)


def evaluate_many(exprs: Sequence[Expr], points, params: Mapping[str, float] | None = None) -> np.ndarray:
    """Evaluate several expressions with shared memoisation; returns ``(len(exprs), N)``."""
    ev = Evaluator(_points_env(points), params)
    return np.stack([ev(e) for e in exprs]) if exprs else np.zeros((0, len(np.atleast_2d(points))))


def depends_on(e: Expr, name: str) -> bool:
    """Syntactic dependence on a coordinate, bound variable or parameter."""
    return name in e.free or name in e.params
