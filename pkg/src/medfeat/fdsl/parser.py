"""Tokenizer and recursive-descent parser for the transformation language.

Grammar (infix precedence, weakest to tightest: min/max, + -, * /, pow;
pow associates right, everything else left; parentheses group freely):

    program   := "feature" IDENT "=" expr
    expr      := literal | STRING | colref | unary "(" expr ")"
               | expr binop expr | "if" "(" cond "," expr "," expr ")"
               | stat "(" expr ")" | gagg "(" IDENT ")"
               | "coalesce" "(" expr "," expr ")" | "(" expr ")"
    cond      := expr cmp expr | "is_missing" "(" expr ")"
               | cond ("and"|"or") cond | "not" cond | "(" cond ")"

String literals are only meaningful as ``==`` operands against categorical
columns; that restriction is enforced at resolution time, not here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .nodes import (
    BINARY_OPS,
    CMP_OPS,
    GAGG_OPS,
    STAT_OPS,
    UNARY_OPS,
    Binary,
    BoolOp,
    Coalesce,
    Col,
    Compare,
    Cond,
    Expr,
    GroupAgg,
    IfExpr,
    IsMissing,
    Literal,
    NotOp,
    Program,
    StringLit,
    Stat,
    Unary,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>>=|<=|==|[-+*/<>(),=])
    """,
    re.VERBOSE,
)

_KEYWORD_BINOPS = {"min", "max", "pow"}
_RESERVED = (
    {"feature", "if", "col", "coalesce", "is_missing", "and", "or", "not"}
    | set(UNARY_OPS)
    | set(STAT_OPS)
    | set(GAGG_OPS)
    | _KEYWORD_BINOPS
)


class ParseError(ValueError):
    """Syntax failure with a 1-based character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class Token:
    kind: str  # "number" | "ident" | "string" | "op" | "eof"
    text: str
    position: int  # 1-based character offset


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos + 1)
        if m.lastgroup != "ws":
            tokens.append(Token(kind=m.lastgroup, text=m.group(), position=pos + 1))
        pos = m.end()
    tokens.append(Token(kind="eof", text="", position=len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    # -- token plumbing --------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.text != text:
            want = what or f"'{text}'"
            raise ParseError(f"expected {want}, got {tok.text!r}", tok.position)
        return self.advance()

    def expect_ident(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            raise ParseError(f"expected {what}, got {tok.text!r}", tok.position)
        return self.advance()

    # -- program ----------------------------------------------------------

    def parse_program(self) -> Program:
        self.expect("feature", "keyword 'feature'")
        name = self.expect_ident("feature name")
        if name.text in _RESERVED:
            raise ParseError(f"feature name {name.text!r} is a reserved word", name.position)
        self.expect("=")
        ast = self.parse_expr()
        tail = self.peek()
        if tail.kind != "eof":
            raise ParseError(f"unexpected trailing input {tail.text!r}", tail.position)
        return Program(name=name.text, ast=ast)

    # -- expressions, weakest binding first -------------------------------

    def parse_expr(self) -> Expr:
        return self._parse_minmax()

    def _parse_minmax(self) -> Expr:
        left = self._parse_add()
        while self.peek().text in ("min", "max"):
            op = self.advance().text
            left = Binary(op, left, self._parse_add())
        return left

    def _parse_add(self) -> Expr:
        left = self._parse_mul()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            left = Binary(op, left, self._parse_mul())
        return left

    def _parse_mul(self) -> Expr:
        left = self._parse_pow()
        while self.peek().text in ("*", "/"):
            op = self.advance().text
            left = Binary(op, left, self._parse_pow())
        return left

    def _parse_pow(self) -> Expr:
        left = self._parse_primary()
        if self.peek().text == "pow":
            self.advance()
            return Binary("pow", left, self._parse_pow())
        return left

    def _parse_call_args(self, name: str, count: int, parse=None) -> list:
        parse = parse or self.parse_expr
        self.expect("(")
        args = [parse()]
        while len(args) < count:
            tok = self.peek()
            if tok.text != ",":
                raise ParseError(
                    f"{name} takes {count} argument(s), got fewer", tok.position
                )
            self.advance()
            args.append(parse())
        tok = self.peek()
        if tok.text == ",":
            raise ParseError(f"{name} takes {count} argument(s), got more", tok.position)
        self.expect(")")
        return args

    def _parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Literal(float(tok.text))
        if tok.kind == "string":
            self.advance()
            return StringLit(tok.text[1:-1])
        if tok.text == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.kind != "ident":
            raise ParseError(f"expected an expression, got {tok.text!r}", tok.position)

        name = tok.text
        if name == "col":
            self.advance()
            self.expect("(")
            col = self.expect_ident("column name")
            self.expect(")")
            return Col(col.text)
        if name in UNARY_OPS:
            self.advance()
            (arg,) = self._parse_call_args(name, 1)
            return Unary(name, arg)
        if name in STAT_OPS:
            self.advance()
            (arg,) = self._parse_call_args(name, 1)
            return Stat(name, arg)
        if name in GAGG_OPS:
            self.advance()
            self.expect("(")
            gid = self.expect_ident("group name")
            self.expect(")")
            return GroupAgg(name, gid.text)
        if name == "coalesce":
            self.advance()
            first, second = self._parse_call_args("coalesce", 2)
            return Coalesce(first, second)
        if name == "if":
            self.advance()
            self.expect("(")
            cond = self.parse_cond()
            self.expect(",")
            then = self.parse_expr()
            self.expect(",")
            orelse = self.parse_expr()
            self.expect(")")
            return IfExpr(cond, then, orelse)
        if name in _KEYWORD_BINOPS:
            raise ParseError(f"{name!r} is an infix operator, not a function", tok.position)
        nxt = self.tokens[self.i + 1]
        if nxt.text == "(":
            raise ParseError(f"unknown function {name!r}", tok.position)
        raise ParseError(
            f"bare identifier {name!r}; column references are written col({name})",
            tok.position,
        )

    # -- conditions --------------------------------------------------------

    def parse_cond(self) -> Cond:
        return self._parse_or()

    def _parse_or(self) -> Cond:
        left = self._parse_and()
        while self.peek().text == "or":
            self.advance()
            left = BoolOp("or", left, self._parse_and())
        return left

    def _parse_and(self) -> Cond:
        left = self._parse_not()
        while self.peek().text == "and":
            self.advance()
            left = BoolOp("and", left, self._parse_not())
        return left

    def _parse_not(self) -> Cond:
        if self.peek().text == "not":
            self.advance()
            return NotOp(self._parse_not())
        return self._parse_cond_atom()

    def _parse_cond_atom(self) -> Cond:
        tok = self.peek()
        if tok.text == "is_missing":
            self.advance()
            (arg,) = self._parse_call_args("is_missing", 1)
            return IsMissing(arg)
        if tok.text == "(":
            # Ambiguous: "(expr) cmp expr" vs "(cond)". Try the comparison
            # reading first; on failure rewind and read a grouped condition.
            saved = self.i
            try:
                return self._parse_comparison()
            except ParseError:
                self.i = saved
            self.advance()
            inner = self.parse_cond()
            self.expect(")")
            return inner
        return self._parse_comparison()

    def _parse_comparison(self) -> Cond:
        left = self.parse_expr()
        tok = self.peek()
        if tok.text not in CMP_OPS:
            raise ParseError(
                f"expected a comparison operator, got {tok.text!r}", tok.position
            )
        self.advance()
        right = self.parse_expr()
        return Compare(tok.text, left, right)


def parse(text: str) -> Program:
    """Parse program text; raises ParseError with a 1-based position."""
    return _Parser(text).parse_program()
