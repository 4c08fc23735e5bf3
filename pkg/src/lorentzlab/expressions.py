"""Restricted arithmetic grammar for metric components.

Accepted language: the binary operators ``+ - * / ^``, unary minus, the
functions ``sin cos exp log``, the constant ``pi`` and the coordinate
variables ``x`` and ``y``.  Expressions parse into sympy trees so exact
partial derivatives are available downstream.  Anything outside the
grammar raises :class:`~lorentzlab.errors.ExpressionError` with the
1-based line/column of the offending token.
"""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from .errors import ExpressionError

X_SYMBOL, Y_SYMBOL = sp.symbols("x y", real=True)

_FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "log": sp.log}
_CONSTANTS = {"pi": sp.pi}
_VARIABLES = {"x": X_SYMBOL, "y": Y_SYMBOL}


@dataclass
class _Token:
    kind: str  # 'num', 'name', 'op', 'lparen', 'rparen', 'end'
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or text[j] == "."
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(_Token("num", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch in "+-*/^":
            tokens.append(_Token("op", ch, line, start_col))
        elif ch == "(":
            tokens.append(_Token("lparen", ch, line, start_col))
        elif ch == ")":
            tokens.append(_Token("rparen", ch, line, start_col))
        else:
            raise ExpressionError(f"unexpected character {ch!r}", line, start_col)
        i += 1
        col += 1
    tokens.append(_Token("end", "", line, col))
    return tokens


# Pratt parser.  Binding powers: +/- (10), */ (20), unary - (25), ^ (30,
# right associative).
_LEFT_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.advance()
        if tok.kind != kind:
            raise ExpressionError(
                f"expected {what}, found {tok.text!r}" if tok.text else f"expected {what}",
                tok.line,
                tok.col,
            )
        return tok

    def parse(self) -> sp.Expr:
        expr = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected trailing {tok.text!r}", tok.line, tok.col)
        return expr

    def expression(self, min_bp: int) -> sp.Expr:
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op":
                break
            bp = _LEFT_BP[tok.text]
            if bp < min_bp:
                break
            self.advance()
            # right-associative power binds its right side at the same level
            right = self.expression(bp if tok.text == "^" else bp + 1)
            if tok.text == "+":
                left = sp.Add(left, right)
            elif tok.text == "-":
                left = sp.Add(left, -right)
            elif tok.text == "*":
                left = sp.Mul(left, right)
            elif tok.text == "/":
                left = sp.Mul(left, sp.Pow(right, -1))
            else:
                left = sp.Pow(left, right)
        return left

    def prefix(self) -> sp.Expr:
        tok = self.advance()
        if tok.kind == "num":
            if "." in tok.text or "e" in tok.text or "E" in tok.text:
                return sp.Float(tok.text)
            return sp.Integer(int(tok.text))
        if tok.kind == "name":
            if tok.text in _VARIABLES:
                return _VARIABLES[tok.text]
            if tok.text in _CONSTANTS:
                return _CONSTANTS[tok.text]
            if tok.text in _FUNCTIONS:
                self.expect("lparen", "'(' after function name")
                arg = self.expression(0)
                self.expect("rparen", "')'")
                return _FUNCTIONS[tok.text](arg)
            raise ExpressionError(f"unknown name {tok.text!r}", tok.line, tok.col)
        if tok.kind == "lparen":
            inner = self.expression(0)
            self.expect("rparen", "')'")
            return inner
        if tok.kind == "op" and tok.text == "-":
            return -self.expression(25)
        if tok.kind == "op" and tok.text == "+":
            return self.expression(25)
        msg = f"unexpected {tok.text!r}" if tok.text else "unexpected end of input"
        raise ExpressionError(msg, tok.line, tok.col)


def parse_expression(text: str) -> sp.Expr:
    """Parse ``text`` into a sympy expression in the variables x, y.

    >>> parse_expression("2*x*y^2")
    2*x*y**2
    """
    return _Parser(_tokenize(text)).parse()


def as_expression(value) -> sp.Expr:
    """Coerce a string, number or sympy object to a sympy expression."""
    if isinstance(value, str):
        return parse_expression(value)
    if isinstance(value, sp.Expr):
        return value
    return sp.sympify(value)
