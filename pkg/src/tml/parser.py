"""Recursive-descent parser for tml source.

Grammar (concrete syntax, // comments allowed anywhere):

    program  ::= method* main
    method   ::= ("Int" | "Class") NAME "(" params? ")" block
    main     ::= "{" decl* stmts? "}" "with" INT
    block    ::= "{" decl* stmts "}"
    decl     ::= type NAME ";"
    type     ::= "Int" | "Class" | "Fut" "<" ("Int" | "Class") ">"
    stmts    ::= stmt+
    stmt     ::= NAME "=" rhs ";"
               | "if" "(" expr ")" "{" stmts "}" "else" "{" stmts "}"
               | "job" "(" expr ")" ";"
               | "return" expr ";"
    rhs      ::= "new" "local" "Class"
               | "new" "Class" "with" expr
               | expr "!" NAME "(" exprs? ")"
               | expr "." "get"
               | expr "." NAME "(" names? ")"
               | expr
    expr     ::= or-expr over: or < and < "<=" < (+ -) < (* /) < unary -
    primary  ::= INT | "true" | "false" | NAME | "this" (".capacity")?
               | "(" expr ")"

Declarations come first in a method body and in main; if-branches contain
plain statement lists. true/false are parsed as the constants 1/0 and unary
minus as 0 - e. Statement lists become right-associated Seq chains.

parse_program also runs the well-formedness pass: unique method names,
unique parameter/local names per method, no statement after a return in the
same sequence, synchronous call arguments restricted to variables, and the
reserved names this/destiny kept out of declarations.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .ast import (
    CLASS,
    INT,
    Assign,
    AsyncCall,
    BinOp,
    Expr,
    FutType,
    Get,
    If,
    Job,
    Main,
    MethodDecl,
    NewLocal,
    NewWith,
    Num,
    Program,
    Pure,
    Return,
    Rhs,
    Seq,
    Stmt,
    SimpleType,
    SyncCall,
    This,
    ThisCapacity,
    Type,
    Var,
    VarDecl,
    seq,
    stmt_list,
)
from .errors import ParseError, WellFormednessError

KEYWORDS = {
    "Int", "Class", "Fut", "new", "local", "with", "if", "else", "job",
    "return", "get", "this", "capacity", "and", "or", "true", "false",
}

RESERVED_NAMES = {"this", "destiny"}


@dataclass(frozen=True)
class Token:
    kind: str  # "name" | "int" | "sym" | "eof"
    text: str
    line: int
    col: int


_SYMBOLS = ("<=", "{", "}", "(", ")", "<", ">", ";", ",", "=", "!", ".", "+", "-", "*", "/")


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            start = i
            while i < n and src[i].isdigit():
                i += 1
            toks.append(Token("int", src[start:i], line, col))
            col += i - start
            continue
        if c.isalpha() or c == "_":
            start = i
            while i < n and (src[i].isalnum() or src[i] == "_"):
                i += 1
            toks.append(Token("name", src[start:i], line, col))
            col += i - start
            continue
        for sym in _SYMBOLS:
            if src.startswith(sym, i):
                toks.append(Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    # -- token plumbing -----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at_sym(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "sym" and t.text == text

    def at_word(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "name" and t.text == text

    def expect_sym(self, text: str) -> Token:
        t = self.peek()
        if not self.at_sym(text):
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def expect_word(self, text: str) -> Token:
        t = self.peek()
        if not self.at_word(text):
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def expect_name(self) -> Token:
        t = self.peek()
        if t.kind != "name" or t.text in KEYWORDS:
            raise ParseError(f"expected identifier, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self._or()

    def _or(self) -> Expr:
        e = self._and()
        while self.at_word("or"):
            self.next()
            e = BinOp("or", e, self._and())
        return e

    def _and(self) -> Expr:
        e = self._cmp()
        while self.at_word("and"):
            self.next()
            e = BinOp("and", e, self._cmp())
        return e

    def _cmp(self) -> Expr:
        e = self._add()
        if self.at_sym("<="):
            self.next()
            return BinOp("<=", e, self._add())
        return e

    def _add(self) -> Expr:
        e = self._mul()
        while self.at_sym("+") or self.at_sym("-"):
            op = self.next().text
            e = BinOp(op, e, self._mul())
        return e

    def _mul(self) -> Expr:
        e = self._unary()
        while self.at_sym("*") or self.at_sym("/"):
            op = self.next().text
            e = BinOp(op, e, self._unary())
        return e

    def _unary(self) -> Expr:
        if self.at_sym("-"):
            self.next()
            return BinOp("-", Num(Fraction(0)), self._unary())
        return self._primary()

    def _primary(self) -> Expr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return Num(Fraction(int(t.text)))
        if self.at_word("true"):
            self.next()
            return Num(Fraction(1))
        if self.at_word("false"):
            self.next()
            return Num(Fraction(0))
        if self.at_word("this"):
            self.next()
            # ".capacity" is part of the expression syntax; ".get"/".m(...)"
            # belong to the assignment right-hand side and are left alone
            if self.at_sym(".") and self.peek(1).kind == "name" and self.peek(1).text == "capacity":
                self.next()
                self.next()
                return ThisCapacity()
            return This()
        if self.at_sym("("):
            self.next()
            e = self.parse_expr()
            self.expect_sym(")")
            return e
        if t.kind == "name" and t.text not in KEYWORDS:
            self.next()
            return Var(t.text)
        raise ParseError(f"expected expression, found {t.text or 'end of input'!r}", t.line, t.col)

    # -- right-hand sides ---------------------------------------------------

    def parse_rhs(self) -> Rhs:
        if self.at_word("new"):
            self.next()
            if self.at_word("local"):
                self.next()
                self.expect_word("Class")
                return NewLocal()
            self.expect_word("Class")
            self.expect_word("with")
            return NewWith(self.parse_expr())
        e = self.parse_expr()
        if self.at_sym("!"):
            self.next()
            name = self.expect_name()
            args = self._call_args()
            return AsyncCall(e, name.text, args)
        if self.at_sym("."):
            self.next()
            if self.at_word("get"):
                self.next()
                return Get(e)
            name = self.expect_name()
            args = self._call_args()
            return SyncCall(e, name.text, args)
        return Pure(e)

    def _call_args(self) -> tuple[Expr, ...]:
        self.expect_sym("(")
        args: list[Expr] = []
        if not self.at_sym(")"):
            args.append(self.parse_expr())
            while self.at_sym(","):
                self.next()
                args.append(self.parse_expr())
        self.expect_sym(")")
        return tuple(args)

    # -- statements ---------------------------------------------------------

    def parse_stmt(self) -> Stmt:
        t = self.peek()
        if self.at_word("if"):
            self.next()
            self.expect_sym("(")
            cond = self.parse_expr()
            self.expect_sym(")")
            then_branch = self._braced_stmts()
            self.expect_word("else")
            else_branch = self._braced_stmts()
            return If(cond, then_branch, else_branch)
        if self.at_word("job"):
            self.next()
            self.expect_sym("(")
            e = self.parse_expr()
            self.expect_sym(")")
            self.expect_sym(";")
            return Job(e)
        if self.at_word("return"):
            self.next()
            e = self.parse_expr()
            self.expect_sym(";")
            return Return(e)
        if t.kind == "name" and t.text not in KEYWORDS:
            name = self.next()
            self.expect_sym("=")
            rhs = self.parse_rhs()
            self.expect_sym(";")
            return Assign(name.text, rhs)
        raise ParseError(f"expected statement, found {t.text or 'end of input'!r}", t.line, t.col)

    def _braced_stmts(self) -> Stmt:
        open_tok = self.expect_sym("{")
        stmts: list[Stmt] = []
        while not self.at_sym("}"):
            stmts.append(self.parse_stmt())
        self.expect_sym("}")
        if not stmts:
            raise ParseError("empty block", open_tok.line, open_tok.col)
        return seq(stmts)

    # -- declarations, methods, program -------------------------------------

    def _at_type(self) -> bool:
        return self.at_word("Int") or self.at_word("Class") or self.at_word("Fut")

    def parse_type(self, allow_fut: bool) -> Type:
        if self.at_word("Int"):
            self.next()
            return INT
        if self.at_word("Class"):
            self.next()
            return CLASS
        if self.at_word("Fut"):
            t = self.next()
            if not allow_fut:
                raise ParseError("future types are only allowed for locals", t.line, t.col)
            self.expect_sym("<")
            inner = self.parse_type(allow_fut=False)
            self.expect_sym(">")
            return FutType(inner)  # type: ignore[arg-type]
        t = self.peek()
        raise ParseError(f"expected type, found {t.text or 'end of input'!r}", t.line, t.col)

    def _decls(self) -> tuple[VarDecl, ...]:
        decls: list[VarDecl] = []
        while self._at_type():
            ty = self.parse_type(allow_fut=True)
            name = self.expect_name()
            self.expect_sym(";")
            decls.append(VarDecl(ty, name.text))
        return tuple(decls)

    def parse_method(self) -> MethodDecl:
        ret = self.parse_type(allow_fut=False)
        name = self.expect_name()
        self.expect_sym("(")
        params: list[VarDecl] = []
        if not self.at_sym(")"):
            while True:
                pty = self.parse_type(allow_fut=False)
                pname = self.expect_name()
                params.append(VarDecl(pty, pname.text))
                if not self.at_sym(","):
                    break
                self.next()
        self.expect_sym(")")
        self.expect_sym("{")
        locals_ = self._decls()
        stmts: list[Stmt] = []
        while not self.at_sym("}"):
            stmts.append(self.parse_stmt())
        close = self.expect_sym("}")
        if not stmts:
            raise ParseError("method body needs at least one statement", close.line, close.col)
        return MethodDecl(ret, name.text, tuple(params), tuple(locals_), seq(stmts))

    def parse_main(self) -> Main:
        self.expect_sym("{")
        locals_ = self._decls()
        stmts: list[Stmt] = []
        while not self.at_sym("}"):
            stmts.append(self.parse_stmt())
        self.expect_sym("}")
        self.expect_word("with")
        t = self.peek()
        if t.kind != "int":
            raise ParseError(f"expected capacity literal, found {t.text or 'end of input'!r}", t.line, t.col)
        self.next()
        cap = Fraction(int(t.text))
        return Main(tuple(locals_), seq(stmts), cap)

    def parse_program(self) -> Program:
        methods: list[MethodDecl] = []
        while self._at_type():
            methods.append(self.parse_method())
        main = self.parse_main()
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
        return Program(tuple(methods), main)


# ---------------------------------------------------------------------------
# well-formedness

def _check_no_return_continuation(s: Stmt) -> None:
    if isinstance(s, Seq):
        if isinstance(s.head, Return):
            raise WellFormednessError("return statement has a continuation")
        _check_no_return_continuation(s.head)
        _check_no_return_continuation(s.tail)
    elif isinstance(s, If):
        _check_no_return_continuation(s.then_branch)
        _check_no_return_continuation(s.else_branch)


def _check_sync_args(s: Stmt) -> None:
    for st in stmt_list(s):
        if isinstance(st, Assign) and isinstance(st.rhs, SyncCall):
            for a in st.rhs.args:
                if not isinstance(a, Var):
                    raise WellFormednessError(
                        f"synchronous call {st.rhs.method!r}: arguments must be variables"
                    )
        elif isinstance(st, If):
            _check_sync_args(st.then_branch)
            _check_sync_args(st.else_branch)


def _check_names(kind: str, decls: list[VarDecl]) -> None:
    seen: set[str] = set()
    for d in decls:
        if d.name in RESERVED_NAMES:
            raise WellFormednessError(f"{kind}: {d.name!r} is reserved")
        if d.name in seen:
            raise WellFormednessError(f"{kind}: duplicate name {d.name!r}")
        seen.add(d.name)


def check_well_formed(p: Program) -> None:
    seen_methods: set[str] = set()
    for m in p.methods:
        if m.name in seen_methods:
            raise WellFormednessError(f"duplicate method {m.name!r}")
        seen_methods.add(m.name)
        _check_names(f"method {m.name!r}", list(m.params) + list(m.locals_))
        _check_no_return_continuation(m.body)
        _check_sync_args(m.body)
    _check_names("main", list(p.main.locals_))
    if p.main.body is not None:
        _check_no_return_continuation(p.main.body)
        _check_sync_args(p.main.body)
    if p.main.capacity <= 0:
        raise WellFormednessError("start cog capacity must be positive")


def parse_program(src: str) -> Program:
    p = _Parser(tokenize(src)).parse_program()
    check_well_formed(p)
    return p
