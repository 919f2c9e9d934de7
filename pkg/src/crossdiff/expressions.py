"""Tiny expression language for closed-form initial density profiles.

Grammar (whitespace insensitive)::

    expr   := term  (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' atom)*
    atom   := NUMBER | 'x' | 'pi' | ('sin'|'cos'|'exp') '(' expr ')' | '(' expr ')'

All binary operators associate to the left within their precedence level;
``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  The only
variable is ``x``; unknown identifiers are rejected at parse time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownIdentifierError",
    "EvaluationError",
    "Num",
    "Var",
    "Pi",
    "Neg",
    "BinOp",
    "Call",
    "parse",
    "evaluate",
    "evaluate_array",
    "to_string",
]

_FUNCTIONS = ("sin", "cos", "exp")


class ExpressionError(Exception):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownIdentifierError(ExpressionSyntaxError):
    pass


class EvaluationError(ExpressionError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Neg:
    child: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


# ---------------------------------------------------------------------------
# tokenizer

def _tokenize(text: str):
    """Yield (kind, value, offset) triples; kinds: num, name, op, end."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(("num", float(text[i:j]), i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
        elif ch in "+-*/^()":
            tokens.append(("op", ch, i))
            i += 1
        else:
            raise ExpressionSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, value, offset = self.peek()
        if kind != "op" or value != op:
            raise ExpressionSyntaxError(f"expected {op!r}", offset)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {value!r}", offset)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                node = BinOp(value, node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                node = BinOp(value, node, self.unary())
            else:
                return node

    def unary(self):
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == "^":
                self.advance()
                node = BinOp("^", node, self.atom())
            else:
                return node

    def atom(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(value)
        if kind == "name":
            if value == "x":
                return Var()
            if value == "pi":
                return Pi()
            if value in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            raise UnknownIdentifierError(f"unknown identifier {value!r}", offset)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError("expected a number, name or '('", offset)


def parse(text: str):
    """Parse ``text`` into an expression tree."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# evaluation

def evaluate(ast, x: float) -> float:
    """Evaluate the tree at a scalar point."""
    if isinstance(ast, Num):
        return ast.value
    if isinstance(ast, Var):
        return float(x)
    if isinstance(ast, Pi):
        return float(np.pi)
    if isinstance(ast, Neg):
        return -evaluate(ast.child, x)
    if isinstance(ast, Call):
        v = evaluate(ast.arg, x)
        try:
            return float(getattr(np, ast.func)(v))
        except (OverflowError, FloatingPointError) as exc:
            raise EvaluationError(str(exc)) from exc
    if isinstance(ast, BinOp):
        a = evaluate(ast.left, x)
        b = evaluate(ast.right, x)
        try:
            if ast.op == "+":
                return a + b
            if ast.op == "-":
                return a - b
            if ast.op == "*":
                return a * b
            if ast.op == "/":
                if b == 0.0:
                    raise EvaluationError("division by zero")
                return a / b
            if ast.op == "^":
                return float(a**b)
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise EvaluationError(str(exc)) from exc
    raise TypeError(f"not an expression node: {ast!r}")


def evaluate_array(ast, x: np.ndarray) -> np.ndarray:
    """Vectorized evaluation on a numpy array.

    Division by zero and invalid operations raise :class:`EvaluationError`
    rather than producing inf/nan silently.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="raise", invalid="raise", over="raise"):
        try:
            return np.broadcast_to(_eval_arr(ast, x), x.shape).astype(float)
        except FloatingPointError as exc:
            raise EvaluationError(str(exc)) from exc


def _eval_arr(ast, x):
    if isinstance(ast, Num):
        return np.float64(ast.value)
    if isinstance(ast, Var):
        return x
    if isinstance(ast, Pi):
        return np.float64(np.pi)
    if isinstance(ast, Neg):
        return -_eval_arr(ast.child, x)
    if isinstance(ast, Call):
        return getattr(np, ast.func)(_eval_arr(ast.arg, x))
    if isinstance(ast, BinOp):
        a = _eval_arr(ast.left, x)
        b = _eval_arr(ast.right, x)
        if ast.op == "+":
            return a + b
        if ast.op == "-":
            return a - b
        if ast.op == "*":
            return a * b
        if ast.op == "/":
            return a / b
        if ast.op == "^":
            return np.power(a, b)
    raise TypeError(f"not an expression node: {ast!r}")


# ---------------------------------------------------------------------------
# printing

_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _level(ast) -> int:
    if isinstance(ast, BinOp):
        return _LEVEL[ast.op]
    if isinstance(ast, Neg):
        return _LEVEL["neg"]
    return _LEVEL["atom"]


def to_string(ast) -> str:
    """Canonical printout; ``parse(to_string(t))`` is structurally ``t``."""
    if isinstance(ast, Num):
        return repr(ast.value)
    if isinstance(ast, Var):
        return "x"
    if isinstance(ast, Pi):
        return "pi"
    if isinstance(ast, Call):
        return f"{ast.func}({to_string(ast.arg)})"
    if isinstance(ast, Neg):
        inner = to_string(ast.child)
        if _level(ast.child) < _LEVEL["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(ast, BinOp):
        lvl = _LEVEL[ast.op]
        left = to_string(ast.left)
        right = to_string(ast.right)
        if _level(ast.left) < lvl:
            left = f"({left})"
        # left associativity: a - (b - c) keeps parentheses on the right
        if _level(ast.right) <= lvl:
            right = f"({right})"
        return f"{left} {ast.op} {right}" if ast.op in "+-" else f"{left}{ast.op}{right}"
    raise TypeError(f"not an expression node: {ast!r}")
