"""Arithmetic expression trees for reaction rate laws.

Rate laws are small arithmetic expressions over species counts, kinetic
parameters, the system-size factor ``omega`` and the binary ``light_time``
input, with operators ``+ - * / ^``, ``floor()`` and the Heaviside step
``H()`` (``H(x) = 1`` for ``x > 0``, else 0).

The tree interpreter in :func:`evaluate` is the reference semantics; the
engines compile the same trees to flat Python source (see
:func:`to_python_source`) for speed.  Both paths evaluate the tree in the
same operation order, so they agree bit-for-bit on the same inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ModelParseError

RESERVED = frozenset({"omega", "light_time", "time", "floor", "H"})


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Species:
    name: str


@dataclass(frozen=True)
class Omega:
    pass


@dataclass(frozen=True)
class Light:
    pass


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    lhs: object
    rhs: object


@dataclass(frozen=True)
class Call:
    fn: str  # 'floor' or 'H'
    arg: object


def evaluate(node, species, params, omega, light):
    """Interpret a rate-law tree.  ``species``/``params`` map names to floats."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Param):
        return params[node.name]
    if isinstance(node, Species):
        return species[node.name]
    if isinstance(node, Omega):
        return omega
    if isinstance(node, Light):
        return float(light)
    if isinstance(node, Neg):
        return -evaluate(node.arg, species, params, omega, light)
    if isinstance(node, Bin):
        a = evaluate(node.lhs, species, params, omega, light)
        b = evaluate(node.rhs, species, params, omega, light)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        if node.op == "^":
            return a ** b
        raise ValueError(f"unknown operator {node.op!r}")
    if isinstance(node, Call):
        x = evaluate(node.arg, species, params, omega, light)
        if node.fn == "floor":
            return float(math.floor(x))
        if node.fn == "H":
            return 1.0 if x > 0.0 else 0.0
        raise ValueError(f"unknown function {node.fn!r}")
    raise TypeError(f"not an expression node: {node!r}")


def species_names(node):
    """Set of species the expression reads."""
    out = set()
    _walk(node, out, Species)
    return out


def param_names(node):
    out = set()
    _walk(node, out, Param)
    return out


def _walk(node, out, want):
    if isinstance(node, want):
        out.add(node.name)
    elif isinstance(node, Neg):
        _walk(node.arg, out, want)
    elif isinstance(node, Bin):
        _walk(node.lhs, out, want)
        _walk(node.rhs, out, want)
    elif isinstance(node, Call):
        _walk(node.arg, out, want)


def uses_light(node):
    if isinstance(node, Light):
        return True
    if isinstance(node, Neg):
        return uses_light(node.arg)
    if isinstance(node, Bin):
        return uses_light(node.lhs) or uses_light(node.rhs)
    if isinstance(node, Call):
        return uses_light(node.arg)
    return False


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def to_text(node):
    """Render in model-file syntax; parses back to an identical tree."""
    return _fmt(node, 0)


def _fmt(node, parent_prec):
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, (Param, Species)):
        return node.name
    if isinstance(node, Omega):
        return "omega"
    if isinstance(node, Light):
        return "light_time"
    if isinstance(node, Neg):
        s = "-" + _fmt(node.arg, _PREC["neg"])
        return f"({s})" if parent_prec > _PREC["neg"] else s
    if isinstance(node, Call):
        return f"{node.fn}({_fmt(node.arg, 0)})"
    prec = _PREC[node.op]
    # left-assoc for + - * /, right-assoc for ^
    if node.op == "^":
        s = f"{_fmt(node.lhs, prec + 1)} ^ {_fmt(node.rhs, prec)}"
    else:
        s = f"{_fmt(node.lhs, prec)} {node.op} {_fmt(node.rhs, prec + 1)}"
    return f"({s})" if parent_prec > prec else s


def to_python_source(node, species_index, param_index, omega_slot):
    """Render as a Python expression over ``state[j]``, ``p[k]`` and ``light``.

    ``omega`` maps to the trailing parameter slot, so networks differing only
    in parameter values or omega share generated source.
    """
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Param):
        return f"p[{param_index[node.name]}]"
    if isinstance(node, Species):
        return f"s{species_index[node.name]}"
    if isinstance(node, Omega):
        return f"p[{omega_slot}]"
    if isinstance(node, Light):
        return "light"
    if isinstance(node, Neg):
        return f"(-{to_python_source(node.arg, species_index, param_index, omega_slot)})"
    if isinstance(node, Bin):
        a = to_python_source(node.lhs, species_index, param_index, omega_slot)
        b = to_python_source(node.rhs, species_index, param_index, omega_slot)
        op = "**" if node.op == "^" else node.op
        return f"({a} {op} {b})"
    if isinstance(node, Call):
        a = to_python_source(node.arg, species_index, param_index, omega_slot)
        if node.fn == "floor":
            return f"np.floor({a})"
        return f"_H({a})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Parser: tokenizer + recursive descent.


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text, line_offset=1):
    toks = []
    i, line, col = 0, line_offset, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t":
            i += 1
            col += 1
            continue
        if c == "\n":
            raise ModelParseError("unexpected newline in expression", line, col)
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] in ".eE" or
                             (text[j] in "+-" and j > i and text[j - 1] in "eE")):
                j += 1
            toks.append(_Token("num", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c in "+-*/^()":
            toks.append(_Token(c, c, line, col))
            i += 1
            col += 1
            continue
        raise ModelParseError(f"unexpected character {c!r} in expression", line, col)
    toks.append(_Token("end", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks, species, params):
        self.toks = toks
        self.pos = 0
        self.species = species
        self.params = params

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind):
        t = self.next()
        if t.kind != kind:
            raise ModelParseError(f"expected {kind!r}, found {t.text!r}", t.line, t.col)
        return t

    def parse(self):
        node = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ModelParseError(f"trailing input {t.text!r}", t.line, t.col)
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek().kind in ("*", "/"):
            op = self.next().kind
            node = Bin(op, node, self.factor())
        return node

    def factor(self):
        if self.peek().kind == "-":
            self.next()
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().kind == "^":
            self.next()
            return Bin("^", base, self.factor())
        return base

    def atom(self):
        t = self.next()
        if t.kind == "num":
            try:
                return Const(float(t.text))
            except ValueError:
                raise ModelParseError(f"bad number {t.text!r}", t.line, t.col) from None
        if t.kind == "(":
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "ident":
            name = t.text
            if name in ("floor", "H"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name == "omega":
                return Omega()
            if name == "light_time":
                return Light()
            if name == "time":
                raise ModelParseError(
                    "'time' is reserved; time dependence enters only through "
                    "light_time", t.line, t.col)
            if name in self.params:
                return Param(name)
            if name in self.species:
                return Species(name)
            raise ModelParseError(f"undeclared name {name!r}", t.line, t.col)
        raise ModelParseError(f"unexpected token {t.text!r}", t.line, t.col)


def parse_expr(text, species, params, line=1):
    """Parse a rate expression, classifying identifiers against the declared
    species and parameter sets.  Undeclared names raise ModelParseError."""
    return _Parser(_tokenize(text, line), frozenset(species), frozenset(params)).parse()
