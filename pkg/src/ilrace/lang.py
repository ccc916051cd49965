"""Core language: AST, access-path expressions, parser and printer.

The language is a minimal imperative object language: one implicit class,
record objects whose fields are pointers, nondeterministic branches and
loops (`if *`, `while *`), a single reentrant lock, and non-recursive
methods with call-by-value parameters and no return values.

Surface syntax (EBNF):

    program   := method+
    method    := "method" IDENT "(" formals? ")" block
    formals   := "arg1" ("," "arg2" ...)?        # contiguous arg1..argN
    block     := "{" stmt* "}"
    stmt      := simple ";" | "if" "*" block "else" block
               | "while" "*" block | IDENT "(" exprs? ")" ";"
    simple    := "skip" | lhs ":=" rhs | IDENT ":=" "new" "(" ")"
               | "lock" "(" ")" | "unlock" "(" ")"
    lhs       := IDENT | path ;  rhs := IDENT | path
    path      := IDENT ("." IDENT)+

Comments run from `//` to end of line.  `push`/`pop` are runtime-only
statement forms and are rejected in source text.

All AST values are immutable and safe to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

_FORMAL_RE = re.compile(r"^arg([1-9][0-9]*)$")

Pos = tuple[int, int]  # (line, col), 1-based


# ---------------------------------------------------------------------------
# Expressions: variables and access paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    """A program variable.  Names of the shape ``argN`` are formals."""

    name: str

    @property
    def formal_index(self) -> Optional[int]:
        m = _FORMAL_RE.match(self.name)
        return int(m.group(1)) if m else None

    @property
    def is_formal(self) -> bool:
        return self.formal_index is not None

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Path:
    """An access path: a root variable followed by one or more fields."""

    root: Var
    fields: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.fields:
            raise ValueError("a Path needs at least one field; use Var instead")

    def __str__(self) -> str:
        return ".".join((self.root.name,) + self.fields)


Expr = Union[Var, Path]


def expr_root(e: Expr) -> Var:
    return e.root if isinstance(e, Path) else e


def expr_fields(e: Expr) -> tuple[str, ...]:
    return e.fields if isinstance(e, Path) else ()


def make_expr(root: Var, fields: tuple[str, ...]) -> Expr:
    return Path(root, fields) if fields else root


def extend_expr(e: Expr, fields: tuple[str, ...]) -> Expr:
    """Append a field sequence to an expression (``x.fs`` / ``pi.fs``)."""
    return make_expr(expr_root(e), expr_fields(e) + fields)


def prefix_le(e1: Expr, e2: Expr) -> bool:
    """Reflexive prefix order on expressions; a bare root precedes its paths."""
    if expr_root(e1) != expr_root(e2):
        return False
    f1, f2 = expr_fields(e1), expr_fields(e2)
    return len(f1) <= len(f2) and f2[: len(f1)] == f1


def prefix_lt(e1: Expr, e2: Expr) -> bool:
    """Strict prefix order: ``x < x.fs`` and ``pi < pi.fs``, never ``e < e``."""
    return prefix_le(e1, e2) and expr_fields(e1) != expr_fields(e2)


def parse_expr(text: str) -> Expr:
    """Convenience constructor: ``parse_expr("arg1.f.g")``."""
    parts = text.split(".")
    return make_expr(Var(parts[0]), tuple(parts[1:]))


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimpleStmt:
    pos: Optional[Pos] = field(default=None, compare=False, kw_only=True)


@dataclass(frozen=True)
class Skip(SimpleStmt):
    def __str__(self) -> str:
        return "skip"


@dataclass(frozen=True)
class AssignVar(SimpleStmt):
    """``x := y`` between variables."""

    dst: Var
    src: Var

    def __str__(self) -> str:
        return f"{self.dst}:={self.src}"


@dataclass(frozen=True)
class Load(SimpleStmt):
    """``x := pi`` read through an access path."""

    dst: Var
    src: Path

    def __str__(self) -> str:
        return f"{self.dst}:={self.src}"


@dataclass(frozen=True)
class Store(SimpleStmt):
    """``pi := x`` write through an access path."""

    dst: Path
    src: Var

    def __str__(self) -> str:
        return f"{self.dst}:={self.src}"


@dataclass(frozen=True)
class New(SimpleStmt):
    """``x := new()`` allocation; fresh objects self-point on every field."""

    dst: Var

    def __str__(self) -> str:
        return f"{self.dst}:=new()"


@dataclass(frozen=True)
class Lock(SimpleStmt):
    def __str__(self) -> str:
        return "lock()"


@dataclass(frozen=True)
class Unlock(SimpleStmt):
    def __str__(self) -> str:
        return "unlock()"


@dataclass(frozen=True)
class Push(SimpleStmt):
    """Runtime marker for entering a method call.  Never parsed from source."""

    callee: str
    actuals: tuple[Expr, ...]

    def __str__(self) -> str:
        args = ",".join(str(e) for e in self.actuals)
        return f"push({self.callee};{args})"


@dataclass(frozen=True)
class Pop(SimpleStmt):
    """Runtime marker for leaving a method call.  Never parsed from source."""

    def __str__(self) -> str:
        return "pop"


# ---------------------------------------------------------------------------
# Compound statements
#
# The grammar is left-recursive: a compound is a simple statement followed
# by a chain of continuations.  Every block is normalized to start with an
# implicit `skip`, so the leftmost leaf of a block is always Simple(Skip()).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompoundStmt:
    pass


@dataclass(frozen=True)
class Simple(CompoundStmt):
    stmt: SimpleStmt


@dataclass(frozen=True)
class Seq(CompoundStmt):
    head: CompoundStmt
    tail: SimpleStmt


@dataclass(frozen=True)
class SeqIf(CompoundStmt):
    head: CompoundStmt
    then_branch: CompoundStmt
    else_branch: CompoundStmt


@dataclass(frozen=True)
class SeqWhile(CompoundStmt):
    head: CompoundStmt
    body: CompoundStmt


@dataclass(frozen=True)
class SeqCall(CompoundStmt):
    head: CompoundStmt
    callee: str
    actuals: tuple[Expr, ...]
    pos: Optional[Pos] = field(default=None, compare=False, kw_only=True)


# Flat view of a block, convenient for validators, printing and fuzzing.


@dataclass(frozen=True)
class IfItem:
    then_branch: CompoundStmt
    else_branch: CompoundStmt


@dataclass(frozen=True)
class WhileItem:
    body: CompoundStmt


@dataclass(frozen=True)
class CallItem:
    callee: str
    actuals: tuple[Expr, ...]
    pos: Optional[Pos] = field(default=None, compare=False, kw_only=True)


BlockItem = Union[SimpleStmt, IfItem, WhileItem, CallItem]


def block_items(c: CompoundStmt) -> list[BlockItem]:
    """Flatten the left spine of a compound into a statement list.

    The implicit leading `skip` is dropped; any other leftmost simple
    statement is kept.
    """
    items: list[BlockItem] = []
    node = c
    while True:
        if isinstance(node, Simple):
            if not isinstance(node.stmt, Skip):
                items.append(node.stmt)
            break
        if isinstance(node, Seq):
            items.append(node.tail)
        elif isinstance(node, SeqIf):
            items.append(IfItem(node.then_branch, node.else_branch))
        elif isinstance(node, SeqWhile):
            items.append(WhileItem(node.body))
        elif isinstance(node, SeqCall):
            items.append(CallItem(node.callee, node.actuals, pos=node.pos))
        else:
            raise TypeError(f"not a compound statement: {node!r}")
        node = node.head
    items.reverse()
    return items


def block_of_items(items: list[BlockItem]) -> CompoundStmt:
    """Rebuild a normalized compound (leading implicit skip) from a flat list."""
    node: CompoundStmt = Simple(Skip())
    for item in items:
        if isinstance(item, IfItem):
            node = SeqIf(node, item.then_branch, item.else_branch)
        elif isinstance(item, WhileItem):
            node = SeqWhile(node, item.body)
        elif isinstance(item, CallItem):
            node = SeqCall(node, item.callee, item.actuals, pos=item.pos)
        else:
            node = Seq(node, item)
    return node


# ---------------------------------------------------------------------------
# Methods and programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Method:
    name: str
    arity: int
    body: CompoundStmt


@dataclass(frozen=True)
class Program:
    """A set of methods; `entries` are the methods whose pairs get race-checked."""

    methods: dict[str, Method]
    entries: tuple[str, ...]

    def method(self, name: str) -> Method:
        return self.methods[name]


def iter_simple_stmts(c: CompoundStmt) -> Iterator[SimpleStmt]:
    for item in block_items(c):
        if isinstance(item, IfItem):
            yield from iter_simple_stmts(item.then_branch)
            yield from iter_simple_stmts(item.else_branch)
        elif isinstance(item, WhileItem):
            yield from iter_simple_stmts(item.body)
        elif isinstance(item, CallItem):
            continue
        else:
            yield item


def iter_exprs(c: CompoundStmt) -> Iterator[Expr]:
    """All expressions appearing in a compound, including call actuals."""
    for item in block_items(c):
        if isinstance(item, IfItem):
            yield from iter_exprs(item.then_branch)
            yield from iter_exprs(item.else_branch)
        elif isinstance(item, WhileItem):
            yield from iter_exprs(item.body)
        elif isinstance(item, CallItem):
            yield from item.actuals
        elif isinstance(item, AssignVar):
            yield item.dst
            yield item.src
        elif isinstance(item, Load):
            yield item.dst
            yield item.src
        elif isinstance(item, Store):
            yield item.dst
            yield item.src
        elif isinstance(item, New):
            yield item.dst


def field_set(p: Program) -> frozenset[str]:
    """The finite field universe: every field mentioned by any path."""
    fields: set[str] = set()
    for m in p.methods.values():
        for e in iter_exprs(m.body):
            fields.update(expr_fields(e))
    return frozenset(fields)


def call_sites(c: CompoundStmt) -> Iterator[CallItem]:
    for item in block_items(c):
        if isinstance(item, IfItem):
            yield from call_sites(item.then_branch)
            yield from call_sites(item.else_branch)
        elif isinstance(item, WhileItem):
            yield from call_sites(item.body)
        elif isinstance(item, CallItem):
            yield item


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class SourceError(Exception):
    """A problem in program text, with a 1-based source position."""

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class ParseError(SourceError):
    pass


class ReservedConstructError(ParseError):
    """`push`/`pop` are runtime-only and may not appear in source."""


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_KEYWORDS = {"method", "if", "else", "while", "skip", "new", "lock", "unlock"}
_RESERVED = {"push", "pop"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<assign>:=)
  | (?P<sym>[{}().,;*])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident", keyword literal, ":=", "{", ... or "eof"
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ParseError(line, col, f"unexpected character {source[i]!r}")
        text = m.group(0)
        if m.lastgroup == "ident":
            if text in _RESERVED:
                raise ReservedConstructError(
                    line, col, f"{text!r} is a runtime-only construct"
                )
            kind = text if text in _KEYWORDS else "ident"
            tokens.append(_Token(kind, text, line, col))
        elif m.lastgroup == "assign":
            tokens.append(_Token(":=", text, line, col))
        elif m.lastgroup == "sym":
            tokens.append(_Token(text, text, line, col))
        # advance position
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        i = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.text if tok.kind != "eof" else "end of input"
            raise ParseError(tok.line, tok.col, f"expected {kind!r}, found {shown!r}")
        return self.next()

    # -- grammar ---------------------------------------------------------

    def program(self) -> Program:
        methods: dict[str, Method] = {}
        first = self.expect("method")
        self.i -= 1  # put it back; loop below re-consumes
        del first
        while self.peek().kind != "eof":
            m = self.method()
            if m.name in methods:
                tok = self.peek(-1)
                raise ParseError(tok.line, tok.col, f"duplicate method {m.name!r}")
            methods[m.name] = m
        prog = Program(methods=methods, entries=tuple(methods))
        _check_call_targets(prog)
        return prog

    def method(self) -> Method:
        self.expect("method")
        name_tok = self.expect("ident")
        self.expect("(")
        arity = self.formals()
        self.expect(")")
        body = self.block()
        _check_formal_arity(name_tok.text, arity, body)
        return Method(name=name_tok.text, arity=arity, body=body)

    def formals(self) -> int:
        count = 0
        while self.peek().kind == "ident":
            tok = self.next()
            count += 1
            if tok.text != f"arg{count}":
                raise ParseError(
                    tok.line, tok.col,
                    f"formals must be contiguous arg1..argN; found {tok.text!r} "
                    f"in position {count}",
                )
            if self.peek().kind == ",":
                self.next()
            else:
                break
        return count

    def block(self) -> CompoundStmt:
        self.expect("{")
        node: CompoundStmt = Simple(Skip())
        while self.peek().kind != "}":
            node = self.statement(node)
        self.expect("}")
        return node

    def statement(self, head: CompoundStmt) -> CompoundStmt:
        tok = self.peek()
        if tok.kind == "if":
            self.next()
            self.expect("*")
            then_branch = self.block()
            self.expect("else")
            else_branch = self.block()
            return SeqIf(head, then_branch, else_branch)
        if tok.kind == "while":
            self.next()
            self.expect("*")
            body = self.block()
            return SeqWhile(head, body)
        simple_or_call = self.simple_or_call()
        self.expect(";")
        if isinstance(simple_or_call, CallItem):
            return SeqCall(
                head, simple_or_call.callee, simple_or_call.actuals,
                pos=simple_or_call.pos,
            )
        return Seq(head, simple_or_call)

    def simple_or_call(self) -> Union[SimpleStmt, CallItem]:
        tok = self.peek()
        pos = (tok.line, tok.col)
        if tok.kind == "skip":
            self.next()
            return Skip(pos=pos)
        if tok.kind == "lock":
            self.next()
            self.expect("(")
            self.expect(")")
            return Lock(pos=pos)
        if tok.kind == "unlock":
            self.next()
            self.expect("(")
            self.expect(")")
            return Unlock(pos=pos)
        if tok.kind != "ident":
            raise ParseError(tok.line, tok.col, f"expected a statement, found {tok.text!r}")
        if self.peek(1).kind == "(":
            callee = self.next().text
            self.next()  # "("
            actuals: list[Expr] = []
            if self.peek().kind != ")":
                actuals.append(self.expr())
                while self.peek().kind == ",":
                    self.next()
                    actuals.append(self.expr())
            self.expect(")")
            return CallItem(callee, tuple(actuals), pos=pos)
        lhs = self.expr()
        self.expect(":=")
        if isinstance(lhs, Path):
            src_tok = self.peek()
            rhs = self.expr()
            if not isinstance(rhs, Var):
                raise ParseError(
                    src_tok.line, src_tok.col,
                    "a store through a path takes a variable on the right",
                )
            return Store(dst=lhs, src=rhs, pos=pos)
        if self.peek().kind == "new":
            self.next()
            self.expect("(")
            self.expect(")")
            return New(dst=lhs, pos=pos)
        rhs = self.expr()
        if isinstance(rhs, Path):
            return Load(dst=lhs, src=rhs, pos=pos)
        return AssignVar(dst=lhs, src=rhs, pos=pos)

    def expr(self) -> Expr:
        tok = self.expect("ident")
        fields: list[str] = []
        while self.peek().kind == ".":
            self.next()
            fields.append(self.expect("ident").text)
        return make_expr(Var(tok.text), tuple(fields))


def _check_formal_arity(method_name: str, arity: int, body: CompoundStmt) -> None:
    """No ``argJ`` with J above the declared arity may appear in the body."""

    def check(c: CompoundStmt) -> None:
        for item in block_items(c):
            if isinstance(item, IfItem):
                check(item.then_branch)
                check(item.else_branch)
            elif isinstance(item, WhileItem):
                check(item.body)
            else:
                exprs: tuple[Expr, ...]
                if isinstance(item, CallItem):
                    exprs = item.actuals
                elif isinstance(item, (AssignVar, Load, Store)):
                    exprs = (item.dst, item.src)
                elif isinstance(item, New):
                    exprs = (item.dst,)
                else:
                    exprs = ()
                for e in exprs:
                    idx = expr_root(e).formal_index
                    if idx is not None and idx > arity:
                        pos = getattr(item, "pos", None) or (0, 0)
                        raise ParseError(
                            pos[0], pos[1],
                            f"arg{idx} exceeds arity {arity} of method {method_name!r}",
                        )

    check(body)


def _check_call_targets(p: Program) -> None:
    """Every called method must exist and match the call-site arity."""
    for m in p.methods.values():
        for site in call_sites(m.body):
            pos = site.pos or (0, 0)
            callee = p.methods.get(site.callee)
            if callee is None:
                raise SourceError(pos[0], pos[1], f"unknown method {site.callee!r}")
            if callee.arity != len(site.actuals):
                raise SourceError(
                    pos[0], pos[1],
                    f"method {site.callee!r} takes {callee.arity} argument(s), "
                    f"got {len(site.actuals)}",
                )


def parse_program(source_text: str) -> Program:
    """Parse source text into a Program.

    Every block comes back normalized with an implicit leading `skip`.
    Raises ParseError / ReservedConstructError / SourceError on bad input.
    """
    tokens = _tokenize(source_text)
    return _Parser(tokens).program()


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------


def _print_simple(s: SimpleStmt) -> str:
    if isinstance(s, Skip):
        return "skip;"
    if isinstance(s, (AssignVar, Load, Store)):
        return f"{s.dst} := {s.src};"
    if isinstance(s, New):
        return f"{s.dst} := new();"
    if isinstance(s, Lock):
        return "lock();"
    if isinstance(s, Unlock):
        return "unlock();"
    raise ValueError(f"cannot print runtime statement {s!r}")


def _print_block(c: CompoundStmt, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    for item in block_items(c):
        if isinstance(item, IfItem):
            out.append(f"{pad}if * {{")
            _print_block(item.then_branch, indent + 1, out)
            out.append(f"{pad}}} else {{")
            _print_block(item.else_branch, indent + 1, out)
            out.append(f"{pad}}}")
        elif isinstance(item, WhileItem):
            out.append(f"{pad}while * {{")
            _print_block(item.body, indent + 1, out)
            out.append(f"{pad}}}")
        elif isinstance(item, CallItem):
            args = ", ".join(str(e) for e in item.actuals)
            out.append(f"{pad}{item.callee}({args});")
        else:
            out.append(pad + _print_simple(item))


def program_to_source(p: Program) -> str:
    """Render a Program back to surface syntax; parse . print is a fixpoint."""
    out: list[str] = []
    for m in p.methods.values():
        formals = ", ".join(f"arg{i}" for i in range(1, m.arity + 1))
        out.append(f"method {m.name}({formals}) {{")
        _print_block(m.body, 1, out)
        out.append("}")
        out.append("")
    return "\n".join(out)
