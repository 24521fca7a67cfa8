"""Recursive-descent parser for the pragmatic SystemVerilog block subset.

Parses the body of one atomic syntactic block (assign statement or always
procedure) into a small statement/expression AST. Tolerant: constructs the
parser does not model are skipped token-by-token rather than rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .tokens import Token, TokenKind, tokenize


class ParseError(Exception):
    pass


# ---------------------------------------------------------------- AST nodes

@dataclass
class Ident:
    name: str

@dataclass
class Number:
    text: str
    width: int | None = None

@dataclass
class StringLit:
    text: str

@dataclass
class Unary:
    op: str
    operand: object

@dataclass
class Binary:
    op: str
    left: object
    right: object

@dataclass
class Ternary:
    cond: object
    then: object
    other: object

@dataclass
class Concat:
    items: list
    repeat: object | None = None

@dataclass
class Index:
    base: object
    indices: list

@dataclass
class Member:
    base: object
    name: str

@dataclass
class Call:
    name: str
    args: list


@dataclass
class Assign:
    lhs: object
    rhs: object
    nonblocking: bool

@dataclass
class If:
    cond: object
    then: list
    other: list = field(default_factory=list)

@dataclass
class CaseItem:
    labels: list          # [] means default
    body: list

@dataclass
class Case:
    subject: object
    items: list

@dataclass
class For:
    init: object | None
    cond: object | None
    step: object | None
    body: list

@dataclass
class ExprStmt:
    expr: object

@dataclass
class EventTerm:
    edge: str | None      # "posedge" | "negedge" | None
    expr: object


def literal_width(text: str) -> int | None:
    """Declared width of a sized literal like 4'b1010, else None."""
    if "'" in text:
        head = text.split("'", 1)[0].strip().replace("_", "")
        if head.isdigit():
            return int(head)
    return None


# ------------------------------------------------------------------ parser

_UNARY_OPS = {"+", "-", "!", "~", "&", "|", "^", "~&", "~|", "~^", "^~"}

# precedence, low to high; all left-associative here
_BINARY_LEVELS = [
    {"||"},
    {"&&"},
    {"|"},
    {"^", "~^", "^~"},
    {"&"},
    {"==", "!=", "===", "!==", "==?", "!=?"},
    {"<", "<=", ">", ">=", "inside"},
    {"<<", ">>", "<<<", ">>>"},
    {"+", "-"},
    {"*", "/", "%"},
    {"**"},
]


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    # -- token helpers
    def peek(self, off: int = 0) -> Token | None:
        j = self.i + off
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text

    def take(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t is None or t.text != text:
            where = t.line if t else -1
            raise ParseError(f"expected {text!r} at line {where}")
        return self.take()

    def done(self) -> bool:
        return self.i >= len(self.toks)

    # -- expressions
    def parse_expression(self):
        return self._ternary()

    def _ternary(self):
        cond = self._binary(0)
        if self.at("?"):
            self.take()
            then = self._ternary()
            self.expect(":")
            other = self._ternary()
            return Ternary(cond, then, other)
        return cond

    def _binary(self, level: int):
        if level >= len(_BINARY_LEVELS):
            return self._unary()
        left = self._binary(level + 1)
        ops = _BINARY_LEVELS[level]
        while True:
            t = self.peek()
            if t is None or t.text not in ops:
                return left
            # '<=' in expression position is less-equal; assignment contexts
            # consume it before reaching here
            self.take()
            right = self._binary(level + 1)
            left = Binary(t.text, left, right)

    def _unary(self):
        t = self.peek()
        if t is not None and t.text in _UNARY_OPS:
            self.take()
            return Unary(t.text, self._unary())
        return self._postfix()

    def _postfix(self):
        node = self._primary()
        while True:
            if self.at("["):
                self.take()
                idx = [self.parse_expression()]
                while self.at(":") or self.at("+:") or self.at("-:"):
                    self.take()
                    idx.append(self.parse_expression())
                self.expect("]")
                node = Index(node, idx)
            elif self.at("."):
                self.take()
                name_tok = self.take()
                node = Member(node, name_tok.text)
            else:
                return node

    def _primary(self):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of block")
        if t.kind == TokenKind.NUMBER:
            self.take()
            return Number(t.text, literal_width(t.text))
        if t.kind == TokenKind.STRING:
            self.take()
            return StringLit(t.text)
        if t.kind == TokenKind.SYSTEM:
            self.take()
            args = []
            if self.at("("):
                args = self._arg_list()
            return Call(t.text, args)
        if t.text == "(":
            self.take()
            inner = self.parse_expression()
            self.expect(")")
            return inner
        if t.text == "{":
            return self._concat()
        if t.kind in (TokenKind.IDENT, TokenKind.KEYWORD):
            self.take()
            if self.at("(") and t.kind == TokenKind.IDENT:
                return Call(t.text, self._arg_list())
            return Ident(t.text)
        # tolerate stray tokens (e.g. casting apostrophes)
        self.take()
        return self._primary()

    def _arg_list(self) -> list:
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.parse_expression())
            while self.at(","):
                self.take()
                args.append(self.parse_expression())
        self.expect(")")
        return args

    def _concat(self):
        self.expect("{")
        first = self.parse_expression()
        if self.at("{"):  # replication {N{expr}}
            self.take()
            items = [self.parse_expression()]
            while self.at(","):
                self.take()
                items.append(self.parse_expression())
            self.expect("}")
            self.expect("}")
            return Concat(items, repeat=first)
        items = [first]
        while self.at(","):
            self.take()
            items.append(self.parse_expression())
        self.expect("}")
        return Concat(items)

    # -- statements
    def parse_statement(self) -> list:
        """Parse one statement; returns a flat list of AST statements."""
        t = self.peek()
        if t is None:
            return []
        text = t.text
        if text == ";":
            self.take()
            return []
        if text == "begin":
            self.take()
            self._skip_label()
            body: list = []
            while not self.at("end") and not self.done():
                body.extend(self.parse_statement())
            if self.at("end"):
                self.take()
                self._skip_label()
            return body
        if text == "if":
            self.take()
            self.expect("(")
            cond = self.parse_expression()
            self.expect(")")
            then = self.parse_statement()
            other: list = []
            if self.at("else"):
                self.take()
                other = self.parse_statement()
            return [If(cond, then, other)]
        if text in ("unique", "unique0", "priority"):
            self.take()
            return self.parse_statement()
        if text in ("case", "casez", "casex"):
            return [self._case()]
        if text == "for":
            return [self._for()]
        if text in ("while", "repeat"):
            self.take()
            self.expect("(")
            cond = self.parse_expression()
            self.expect(")")
            body = self.parse_statement()
            return [For(None, cond, None, body)]
        if text == "forever":
            self.take()
            return [For(None, None, None, self.parse_statement())]
        if t.kind == TokenKind.SYSTEM:
            call = self._primary()
            if self.at(";"):
                self.take()
            return [ExprStmt(call)]
        if t.kind in (TokenKind.IDENT,) or text in ("{",):
            return [self._assignment_or_call()]
        # unmodeled construct: skip to ';' at depth 0
        self._skip_simple()
        return []

    def _skip_label(self):
        if self.at(":"):
            self.take()
            if self.peek() is not None:
                self.take()

    def _case(self):
        self.take()  # case/casez/casex
        self.expect("(")
        subject = self.parse_expression()
        self.expect(")")
        items: list[CaseItem] = []
        while not self.at("endcase") and not self.done():
            if self.at("default"):
                self.take()
                if self.at(":"):
                    self.take()
                items.append(CaseItem([], self.parse_statement()))
                continue
            labels = [self.parse_expression()]
            while self.at(","):
                self.take()
                labels.append(self.parse_expression())
            self.expect(":")
            items.append(CaseItem(labels, self.parse_statement()))
        if self.at("endcase"):
            self.take()
        return Case(subject, items)

    def _for(self):
        self.take()
        self.expect("(")
        init = None
        if not self.at(";"):
            init = self._assignment_or_call(terminator=None, allow_decl=True)
        self.expect(";")
        cond = None if self.at(";") else self.parse_expression()
        self.expect(";")
        step = None
        if not self.at(")"):
            step = self._assignment_or_call(terminator=None)
        self.expect(")")
        return For(init, cond, step, self.parse_statement())

    def _assignment_or_call(self, terminator: str | None = ";",
                            allow_decl: bool = False):
        if allow_decl:
            t = self.peek()
            if t is not None and t.kind == TokenKind.KEYWORD:
                self.take()  # e.g. 'int' in for (int i = 0; ...)
        lhs = self._postfix() if not self.at("{") else self._concat()
        if isinstance(lhs, Call):
            if terminator and self.at(terminator):
                self.take()
            return ExprStmt(lhs)
        nonblocking = False
        if self.at("<="):
            nonblocking = True
            self.take()
        elif self.at("="):
            self.take()
        elif self.at("++") or self.at("--"):
            op = self.take().text[0]
            if terminator and self.at(terminator):
                self.take()
            return Assign(lhs, Binary(op, lhs, Number("1")), False)
        elif self.peek() is not None and self.peek().text in (
                "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="):
            op = self.take().text[:-1]
            rhs = self.parse_expression()
            if terminator and self.at(terminator):
                self.take()
            return Assign(lhs, Binary(op, lhs, rhs), False)
        else:
            # bare expression statement (e.g. task call without parens)
            if terminator and not self.done():
                self._skip_simple()
            return ExprStmt(lhs)
        rhs = self.parse_expression()
        if terminator and self.at(terminator):
            self.take()
        return Assign(lhs, rhs, nonblocking)

    def _skip_simple(self):
        depth = 0
        while not self.done():
            t = self.take()
            if t.text in "([{":
                depth += 1
            elif t.text in ")]}":
                depth -= 1
            elif t.text == ";" and depth <= 0:
                return


def parse_block_body(text: str) -> tuple[list[EventTerm], list]:
    """Parse one block's source text into (event terms, statements).

    Accepts an `assign` statement or an always procedure (any flavor).
    """
    toks = tokenize(text)
    p = Parser(toks)
    events: list[EventTerm] = []
    t = p.peek()
    if t is None:
        return events, []
    if t.text == "assign":
        p.take()
        stmt = p._assignment_or_call()
        stmts = [stmt]
        while not p.done() and p.at(","):  # assign a = b, c = d;
            p.take()
            stmts.append(p._assignment_or_call(terminator=None))
        return events, [s for s in stmts if s is not None]
    if t.text in ("always", "always_ff", "always_comb", "always_latch"):
        p.take()
        if p.at("@"):
            p.take()
            if p.at("*"):
                p.take()
            elif p.at("("):
                p.take()
                while not p.at(")") and not p.done():
                    edge = None
                    if p.at("posedge") or p.at("negedge"):
                        edge = p.take().text
                    elif p.at("*"):
                        p.take()
                        continue
                    expr = p.parse_expression()
                    events.append(EventTerm(edge, expr))
                    if p.at("or") or p.at(","):
                        p.take()
                p.expect(")")
        return events, p.parse_statement()
    # fall back: treat the whole text as a statement sequence
    stmts: list = []
    while not p.done():
        stmts.extend(p.parse_statement())
    return events, stmts
