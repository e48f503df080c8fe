"""Parser and jet evaluator for Gram-matrix / kernel expressions.

Grammar (whitespace insensitive)::

    expr    :=  term (('+' | '-') term)*
    term    :=  factor (('*' | '/') factor)*
    factor  :=  '-' factor | power
    power   :=  atom ('^' signed_int)?
    atom    :=  number | 'i' | variable | '(' expr ')'
              | 'exp' '(' expr ')' | 'log' '(' expr ')'
              | 'pow' '(' expr ',' real ')'
    variable:=  'z' digits | 'zb' digits          (z1..zm and their conjugates)
    number  :=  digits ['.' digits] ['i']         ('2', '0.5', '2i', '1.5i')

Complex literals are written as sums, e.g. ``1+2i``.  ``^`` takes an integer
exponent; arbitrary real exponents go through ``pow(expr, r)`` and use the
principal branch (the evaluated constant term must have positive real part).

Evaluation is exact truncated Taylor arithmetic over the AST; there are no
finite differences anywhere.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .jetcore import HermJet, HoloJet

__all__ = [
    "ParseError",
    "ExprNode",
    "Var",
    "Lit",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Neg",
    "IntPow",
    "RealPow",
    "Exp",
    "Log",
    "parse_kernel",
    "eval_herm_jet",
    "eval_holo_jet",
    "BundleSpec",
]


class ParseError(ValueError):
    """Syntax or type error, carrying the source position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written in the source
    conjugated: bool

    def text(self) -> str:
        return f"{'zb' if self.conjugated else 'z'}{self.index}"


@dataclass(frozen=True)
class Lit:
    value: complex

    def text(self) -> str:
        re_, im = self.value.real, self.value.imag
        if im == 0.0:
            return _num(re_)
        if re_ == 0.0:
            return f"{_num(im)}i"
        sign = "+" if im > 0 else "-"
        return f"({_num(re_)} {sign} {_num(abs(im))}i)"


@dataclass(frozen=True)
class Add:
    left: "ExprNode"
    right: "ExprNode"

    def text(self) -> str:
        return f"({self.left.text()} + {self.right.text()})"


@dataclass(frozen=True)
class Sub:
    left: "ExprNode"
    right: "ExprNode"

    def text(self) -> str:
        return f"({self.left.text()} - {self.right.text()})"


@dataclass(frozen=True)
class Mul:
    left: "ExprNode"
    right: "ExprNode"

    def text(self) -> str:
        return f"({self.left.text()} * {self.right.text()})"


@dataclass(frozen=True)
class Div:
    left: "ExprNode"
    right: "ExprNode"

    def text(self) -> str:
        return f"({self.left.text()} / {self.right.text()})"


@dataclass(frozen=True)
class Neg:
    arg: "ExprNode"

    def text(self) -> str:
        return f"(-{self.arg.text()})"


@dataclass(frozen=True)
class IntPow:
    base: "ExprNode"
    exponent: int

    def text(self) -> str:
        return f"({self.base.text()} ^ {self.exponent})"


@dataclass(frozen=True)
class RealPow:
    base: "ExprNode"
    exponent: float

    def text(self) -> str:
        return f"pow({self.base.text()}, {_num(self.exponent)})"


@dataclass(frozen=True)
class Exp:
    arg: "ExprNode"

    def text(self) -> str:
        return f"exp({self.arg.text()})"


@dataclass(frozen=True)
class Log:
    arg: "ExprNode"

    def text(self) -> str:
        return f"log({self.arg.text()})"


ExprNode = Union[Var, Lit, Add, Sub, Mul, Div, Neg, IntPow, RealPow, Exp, Log]


def _num(x: float) -> str:
    return repr(int(x)) if float(x).is_integer() else repr(float(x))


# ---------------------------------------------------------------------------
# tokenizer / recursive-descent parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+(?:\.\d+)?i?|\.\d+i?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_VAR_RE = re.compile(r"^(zb?)(\d+)$")


def _tokenize(text: str):
    tokens, pos = [], 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if match.lastgroup == "number":
            tokens.append(("number", match.group("number"), match.start("number")))
        elif match.lastgroup == "name":
            tokens.append(("name", match.group("name"), match.start("name")))
        else:
            tokens.append(("op", match.group("op"), match.start("op")))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def next(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.next()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def parse(self) -> ExprNode:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {val!r}", pos)
        return node

    def expr(self) -> ExprNode:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> ExprNode:
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self) -> ExprNode:
        if self.peek()[1] == "-":
            self.next()
            return Neg(self.factor())
        return self.power()

    def power(self) -> ExprNode:
        base = self.atom()
        if self.peek()[1] == "^":
            self.next()
            sign = 1
            while self.peek()[1] == "-":
                self.next()
                sign = -sign
            kind, val, pos = self.next()
            if kind != "number" or not val.isdigit():
                raise ParseError("'^' needs an integer exponent (use pow() for reals)", pos)
            return IntPow(base, sign * int(val))
        return base

    def atom(self) -> ExprNode:
        kind, val, pos = self.next()
        if kind == "number":
            if val.endswith("i"):
                return Lit(complex(0.0, float(val[:-1] or "1")))
            return Lit(complex(float(val), 0.0))
        if kind == "name":
            if val == "i":
                return Lit(1j)
            if val in ("exp", "log"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Exp(arg) if val == "exp" else Log(arg)
            if val == "pow":
                self.expect("(")
                base = self.expr()
                self.expect(",")
                exponent = self._signed_real()
                self.expect(")")
                if float(exponent).is_integer():
                    return IntPow(base, int(exponent))
                return RealPow(base, float(exponent))
            m = _VAR_RE.match(val)
            if m:
                return Var(int(m.group(2)), m.group(1) == "zb")
            raise ParseError(f"unknown identifier {val!r}", pos)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected token {val or 'end of input'!r}", pos)

    def _signed_real(self) -> float:
        sign = 1.0
        while self.peek()[1] == "-":
            self.next()
            sign = -sign
        kind, val, pos = self.next()
        if kind != "number" or val.endswith("i"):
            raise ParseError("expected a real exponent", pos)
        return sign * float(val)


def parse_kernel(text: str) -> ExprNode:
    """Parse an expression in z1..zm / zb1..zbm into an AST."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# jet evaluation

def _max_var(node: ExprNode) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Lit):
        return 0
    if isinstance(node, (Add, Sub, Mul, Div)):
        return max(_max_var(node.left), _max_var(node.right))
    if isinstance(node, (Neg, Exp, Log)):
        return max_variable_index(node.arg)
    return _max_var(node.base) if isinstance(node, (IntPow, RealPow)) else 0


def max_variable_index(node: ExprNode) -> int:
    if isinstance(node, (Neg, Exp, Log)):
        return max_variable_index(node.arg)
    return _max_var(node)


def has_conjugated_var(node: ExprNode) -> bool:
    if isinstance(node, Var):
        return node.conjugated
    if isinstance(node, (Add, Sub, Mul, Div)):
        return has_conjugated_var(node.left) or has_conjugated_var(node.right)
    if isinstance(node, (Neg, Exp, Log)):
        return has_conjugated_var(node.arg)
    if isinstance(node, (IntPow, RealPow)):
        return has_conjugated_var(node.base)
    return False


def conjugate_expr(node: ExprNode) -> ExprNode:
    """The expression of the complex conjugate: z <-> zb, literals conjugated.

    Only valid structurally (exp/log/pow commute with conjugation on the
    principal branch for the positive-real constant terms this grammar
    enforces at evaluation time).
    """
    if isinstance(node, Var):
        return Var(node.index, not node.conjugated)
    if isinstance(node, Lit):
        return Lit(node.value.conjugate())
    if isinstance(node, Add):
        return Add(conjugate_expr(node.left), conjugate_expr(node.right))
    if isinstance(node, Sub):
        return Sub(conjugate_expr(node.left), conjugate_expr(node.right))
    if isinstance(node, Mul):
        return Mul(conjugate_expr(node.left), conjugate_expr(node.right))
    if isinstance(node, Div):
        return Div(conjugate_expr(node.left), conjugate_expr(node.right))
    if isinstance(node, Neg):
        return Neg(conjugate_expr(node.arg))
    if isinstance(node, IntPow):
        return IntPow(conjugate_expr(node.base), node.exponent)
    if isinstance(node, RealPow):
        return RealPow(conjugate_expr(node.base), node.exponent)
    if isinstance(node, Exp):
        return Exp(conjugate_expr(node.arg))
    if isinstance(node, Log):
        return Log(conjugate_expr(node.arg))
    raise TypeError(f"not an expression node: {node!r}")


def _eval(node: ExprNode, make_var, make_const):
    if isinstance(node, Lit):
        return make_const(node.value)
    if isinstance(node, Var):
        return make_var(node)
    if isinstance(node, Add):
        return _eval(node.left, make_var, make_const) + _eval(node.right, make_var, make_const)
    if isinstance(node, Sub):
        return _eval(node.left, make_var, make_const) - _eval(node.right, make_var, make_const)
    if isinstance(node, Mul):
        return _eval(node.left, make_var, make_const) * _eval(node.right, make_var, make_const)
    if isinstance(node, Div):
        return _eval(node.left, make_var, make_const) * _eval(
            node.right, make_var, make_const
        ).inv()
    if isinstance(node, Neg):
        return -_eval(node.arg, make_var, make_const)
    if isinstance(node, IntPow):
        return _eval(node.base, make_var, make_const).power(node.exponent)
    if isinstance(node, RealPow):
        return _eval(node.base, make_var, make_const).power(node.exponent)
    if isinstance(node, Exp):
        return _eval(node.arg, make_var, make_const).exp()
    if isinstance(node, Log):
        return _eval(node.arg, make_var, make_const).log()
    raise TypeError(f"not an expression node: {node!r}")


def eval_herm_jet(
    node: ExprNode, center, holo_order: int, anti_order: int, dim=None
) -> HermJet:
    """Jet of the expression at `center` in (z - z0, conj(z) - conj(z0))."""
    dim = len(center) if dim is None else dim
    if max_variable_index(node) > dim:
        raise ParseError(f"variable index exceeds dimension {dim}", 0)

    def make_var(v: Var):
        if v.conjugated:
            return HermJet.conj_coordinate(v.index - 1, center, holo_order, anti_order)
        return HermJet.coordinate(v.index - 1, center, holo_order, anti_order)

    def make_const(value):
        return HermJet.constant(value, center, holo_order, anti_order)

    return _eval(node, make_var, make_const)


def eval_holo_jet(node: ExprNode, center, order: int, dim=None) -> HoloJet:
    """Jet of a purely holomorphic expression (no zb variables allowed)."""
    dim = len(center) if dim is None else dim
    if has_conjugated_var(node):
        raise ParseError("conjugated variable in a holomorphic expression", 0)
    if max_variable_index(node) > dim:
        raise ParseError(f"variable index exceeds dimension {dim}", 0)
    # evaluate through the Hermitian ring with anti-order 0, then project
    herm = eval_herm_jet(node, center, order, 0, dim)
    return herm.holo_part()


# ---------------------------------------------------------------------------
# bundle specifications


class BundleSpec:
    """A rank-l Hermitian bundle given by its Gram matrix in a global frame.

    Entries are scalar expressions in z1..zm, zb1..zbm; the grid must be
    Hermitian-symmetric (entry (q,p) is the conjugate of entry (p,q) under
    z <-> zb), which is validated numerically at sample points.
    """

    def __init__(self, label: str, dimension: int, entries):
        self.label = str(label)
        self.dimension = int(dimension)
        if isinstance(entries, str):
            entries = [[entries]]
        self.entries = [
            [e if not isinstance(e, str) else parse_kernel(e) for e in row]
            for row in entries
        ]
        self.rank = len(self.entries)
        for row in self.entries:
            if len(row) != self.rank:
                raise ValueError(f"bundle {label!r}: Gram entry grid is not square")
        for row in self.entries:
            for e in row:
                if max_variable_index(e) > self.dimension:
                    raise ValueError(
                        f"bundle {label!r}: entry uses a variable beyond z{self.dimension}"
                    )

    def gram_jet(self, center, holo_order: int, anti_order: int) -> HermJet:
        """HermJet of the Gram matrix at `center`."""
        if len(center) != self.dimension:
            raise ValueError(
                f"bundle {self.label!r} has dimension {self.dimension}, "
                f"center has {len(center)}"
            )
        grid = [
            [eval_herm_jet(e, center, holo_order, anti_order) for e in row]
            for row in self.entries
        ]
        return HermJet.from_entries(grid)

    def validate(self, centers, tol: float = 1e-12) -> None:
        """Check Hermitian symmetry and positive definiteness at sample centers."""
        for center in centers:
            jet = self.gram_jet(center, 2, 2)
            defect = jet.hermitian_defect()
            scale = 1.0 + float(np.max(np.abs(jet.coeffs)))
            if defect > tol * scale:
                raise ValueError(
                    f"bundle {self.label!r}: Gram expression is not Hermitian-symmetric "
                    f"at {center} (defect {defect:.2e})"
                )
            eigs = np.linalg.eigvalsh(jet.value())
            if eigs.min() <= 0.0:
                raise ValueError(
                    f"bundle {self.label!r}: Gram matrix not positive definite at "
                    f"{center} (min eigenvalue {eigs.min():.2e})"
                )
