"""Recursive-descent parser for the supported Verilog subset.

Produces one AstModule per module declaration. Case statements are desugared
here into if/else chains of equality comparisons; negated reductions (~&, ~|,
unary ~^) become logical-not of the plain reduction so the downstream node
vocabulary stays closed.
"""

from __future__ import annotations

from .lexer import Token, TokenKind, tokenize
from .vast import (
    AlwaysBlock,
    AstModule,
    Binary,
    Concat,
    ContAssign,
    Expr,
    Ident,
    IfStmt,
    NetDecl,
    Number,
    PartSelect,
    Port,
    ProcAssign,
    Stmt,
    Ternary,
    Unary,
)


class ParseError(ValueError):
    def __init__(self, line: int, column: int, expected: str, found: str):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        super().__init__(f"{line}:{column}: expected {expected}, found {found!r}")


class UnsupportedConstruct(ValueError):
    def __init__(self, name: str, line: int = 0, column: int = 0):
        self.name = name
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: unsupported construct: {name}")


# Binary operator precedence levels, weakest first. Ternary binds weaker still.
_BINARY_LEVELS = (
    ("||",),
    ("&&",),
    ("|",),
    ("^", "~^", "^~"),
    ("&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
)

_UNARY_OPS = ("!", "~", "&", "|", "^", "~&", "~|", "~^", "-", "+")

# Reserved words that are recognized but outside the subset.
_REJECTED_KEYWORDS = {
    "parameter", "localparam", "integer", "initial", "for", "while",
    "function", "endfunction", "task", "endtask", "generate", "endgenerate",
    "genvar", "inout", "casex", "signed",
}


class _Stream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token | None:
        p = self.pos + ahead
        return self.tokens[p] if p < len(self.tokens) else None

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else Token(TokenKind.PUNCT, "", 1, 1)
            raise ParseError(last.line, last.column, "more input", "end of file")
        self.pos += 1
        return tok

    def check(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    def accept(self, text: str) -> Token | None:
        if self.check(text):
            return self.next()
        return None

    def expect(self, text: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok is None or tok.text != text:
            found = "end of file" if tok is None else tok.text
            line = tok.line if tok else (self.tokens[-1].line if self.tokens else 1)
            col = tok.column if tok else (self.tokens[-1].column if self.tokens else 1)
            raise ParseError(line, col, what or repr(text), found)
        return self.next()

    def expect_ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok is None or tok.kind != TokenKind.IDENT:
            found = "end of file" if tok is None else tok.text
            line = tok.line if tok else 1
            col = tok.column if tok else 1
            raise ParseError(line, col, what, found)
        return self.next()


def parse(tokens: list[Token]) -> list[AstModule]:
    """Parse a token stream into one AstModule per module declaration."""
    ts = _Stream(tokens)
    modules = []
    while not ts.at_end():
        tok = ts.peek()
        assert tok is not None
        if tok.text != "module":
            raise ParseError(tok.line, tok.column, "'module'", tok.text)
        modules.append(_parse_module(ts))
    return modules


def parse_source(source: str) -> list[AstModule]:
    return parse(tokenize(source))


def _reject_if_unsupported(tok: Token) -> None:
    if tok.kind == TokenKind.KEYWORD and tok.text in _REJECTED_KEYWORDS:
        raise UnsupportedConstruct(tok.text, tok.line, tok.column)


def _parse_range(ts: _Stream) -> int:
    """Parse [msb:lsb]; returns the width. Bounds must be constant numbers."""
    open_tok = ts.expect("[")
    msb_tok = ts.next()
    if msb_tok.kind != TokenKind.NUMBER:
        raise UnsupportedConstruct("non-constant range bound", msb_tok.line, msb_tok.column)
    ts.expect(":")
    lsb_tok = ts.next()
    if lsb_tok.kind != TokenKind.NUMBER:
        raise UnsupportedConstruct("non-constant range bound", lsb_tok.line, lsb_tok.column)
    ts.expect("]")
    msb, lsb = int(msb_tok.value or 0), int(lsb_tok.value or 0)
    if msb < lsb:
        raise ParseError(open_tok.line, open_tok.column, "msb >= lsb in range", f"[{msb}:{lsb}]")
    return msb - lsb + 1


def _parse_module(ts: _Stream) -> AstModule:
    ts.expect("module")
    name_tok = ts.expect_ident("module name")
    mod = AstModule(name=name_tok.text)
    declared: dict[str, Port] = {}

    ts.expect("(")
    if not ts.check(")"):
        direction: str | None = None
        width = 1
        while True:
            tok = ts.peek()
            assert tok is not None
            _reject_if_unsupported(tok)
            if tok.text in ("input", "output"):
                ts.next()
                direction = tok.text
                ts.accept("wire")
                is_reg = ts.accept("reg") is not None
                width = _parse_range(ts) if ts.check("[") else 1
                name = ts.expect_ident("port name")
                port = Port(name.text, direction, width, name.line)
                mod.ports.append(port)
                declared[name.text] = port
                if is_reg:
                    mod.nets.append(NetDecl(name.text, "reg", width, name.line))
            elif tok.kind == TokenKind.IDENT:
                ts.next()
                if direction is None:
                    # Non-ANSI header: directions come from body declarations.
                    port = Port(tok.text, "", 1, tok.line)
                else:
                    port = Port(tok.text, direction, width, tok.line)
                mod.ports.append(port)
                declared[tok.text] = port
            else:
                raise ParseError(tok.line, tok.column, "port declaration", tok.text)
            if not ts.accept(","):
                break
        ts.expect(")")
    else:
        ts.next()
    ts.expect(";")

    while not ts.check("endmodule"):
        tok = ts.peek()
        if tok is None:
            raise ParseError(name_tok.line, name_tok.column, "'endmodule'", "end of file")
        _reject_if_unsupported(tok)
        if tok.text in ("input", "output"):
            _parse_body_port_decl(ts, mod, declared)
        elif tok.text in ("wire", "reg"):
            _parse_net_decl(ts, mod)
        elif tok.text == "assign":
            _parse_cont_assign(ts, mod)
        elif tok.text == "always":
            mod.always_blocks.append(_parse_always(ts))
        else:
            raise ParseError(tok.line, tok.column, "module item", tok.text)

    ts.expect("endmodule")
    undirected = [p.name for p in mod.ports if not p.direction]
    if undirected:
        p = mod.ports[0]
        raise ParseError(p.line, 1, "direction declaration for port(s)", ", ".join(undirected))
    return mod


def _parse_body_port_decl(ts: _Stream, mod: AstModule, declared: dict[str, Port]) -> None:
    dir_tok = ts.next()
    ts.accept("wire")
    is_reg = ts.accept("reg") is not None
    width = _parse_range(ts) if ts.check("[") else 1
    while True:
        name = ts.expect_ident("port name")
        port = declared.get(name.text)
        if port is None:
            raise ParseError(name.line, name.column, "a name from the module port list", name.text)
        if port.direction:
            raise ParseError(name.line, name.column, "undeclared port", f"{name.text} (already declared)")
        port.direction = dir_tok.text
        port.width = width
        if is_reg:
            mod.nets.append(NetDecl(name.text, "reg", width, name.line))
        if not ts.accept(","):
            break
    ts.expect(";")


def _parse_net_decl(ts: _Stream, mod: AstModule) -> None:
    kind_tok = ts.next()
    width = _parse_range(ts) if ts.check("[") else 1
    while True:
        name = ts.expect_ident("net name")
        mod.nets.append(NetDecl(name.text, kind_tok.text, width, name.line))
        if not ts.accept(","):
            break
    ts.expect(";")


def _parse_cont_assign(ts: _Stream, mod: AstModule) -> None:
    ts.expect("assign")
    target = _parse_assign_target(ts)
    ts.expect("=")
    rhs = _parse_expr(ts)
    ts.expect(";")
    mod.assigns.append(ContAssign(target.text, rhs, target.line))


def _parse_assign_target(ts: _Stream) -> Token:
    tok = ts.peek()
    assert tok is not None
    if tok.text == "{":
        raise UnsupportedConstruct("concatenation assignment target", tok.line, tok.column)
    target = ts.expect_ident("assignment target")
    if ts.check("["):
        raise UnsupportedConstruct("part-select assignment target", target.line, target.column)
    return target


def _parse_always(ts: _Stream) -> AlwaysBlock:
    kw = ts.expect("always")
    ts.expect("@")
    ts.expect("(")
    tok = ts.peek()
    assert tok is not None
    if tok.text == "*":
        ts.next()
        trigger, clock = "comb", None
    elif tok.text == "posedge":
        ts.next()
        clock_tok = ts.expect_ident("clock name")
        trigger, clock = "posedge", clock_tok.text
        if ts.check("or") or ts.check(","):
            nxt = ts.next()
            raise UnsupportedConstruct("multi-signal sensitivity list", nxt.line, nxt.column)
    elif tok.text == "negedge":
        raise UnsupportedConstruct("negedge trigger", tok.line, tok.column)
    else:
        raise UnsupportedConstruct("explicit sensitivity list", tok.line, tok.column)
    ts.expect(")")
    body = _parse_stmt(ts)
    return AlwaysBlock(trigger, clock, body, kw.line)


def _parse_stmt(ts: _Stream) -> list[Stmt]:
    """Parse one statement; returns a list so begin/end flattens naturally."""
    tok = ts.peek()
    if tok is None:
        raise ParseError(1, 1, "statement", "end of file")
    _reject_if_unsupported(tok)

    if tok.text == "begin":
        ts.next()
        stmts: list[Stmt] = []
        while not ts.check("end"):
            if ts.at_end():
                raise ParseError(tok.line, tok.column, "'end'", "end of file")
            stmts.extend(_parse_stmt(ts))
        ts.expect("end")
        return stmts

    if tok.text == "if":
        ts.next()
        ts.expect("(")
        cond = _parse_expr(ts)
        ts.expect(")")
        then_body = _parse_stmt(ts)
        else_body: list[Stmt] = []
        if ts.accept("else"):
            else_body = _parse_stmt(ts)
        return [IfStmt(cond, then_body, else_body, tok.line)]

    if tok.text in ("case", "casez"):
        return [_parse_case(ts)]

    target = _parse_assign_target(ts)
    op = ts.next()
    if op.text == "=":
        blocking = True
    elif op.text == "<=":
        blocking = False
    else:
        raise ParseError(op.line, op.column, "'=' or '<='", op.text)
    rhs = _parse_expr(ts)
    ts.expect(";")
    return [ProcAssign(target.text, rhs, blocking, target.line)]


def _parse_case(ts: _Stream) -> Stmt:
    """Desugar case into an if/else chain of equality comparisons."""
    kw = ts.next()
    if kw.text == "casez":
        raise UnsupportedConstruct("casez", kw.line, kw.column)
    ts.expect("(")
    selector = _parse_expr(ts)
    ts.expect(")")

    arms: list[tuple[list[Expr], list[Stmt]]] = []
    default_body: list[Stmt] | None = None
    while not ts.check("endcase"):
        if ts.at_end():
            raise ParseError(kw.line, kw.column, "'endcase'", "end of file")
        if ts.accept("default"):
            ts.expect(":")
            if default_body is not None:
                raise ParseError(kw.line, kw.column, "single default arm", "second default")
            default_body = _parse_stmt(ts)
            continue
        labels = [_parse_expr(ts)]
        while ts.accept(","):
            labels.append(_parse_expr(ts))
        ts.expect(":")
        arms.append((labels, _parse_stmt(ts)))
    ts.expect("endcase")

    result: list[Stmt] = default_body if default_body is not None else []
    for labels, body in reversed(arms):
        cond: Expr = Binary("==", selector, labels[0])
        for label in labels[1:]:
            cond = Binary("||", cond, Binary("==", selector, label))
        result = [IfStmt(cond, body, result, kw.line)]
    if not result:
        raise ParseError(kw.line, kw.column, "at least one case arm", "empty case")
    return result[0]


def _parse_expr(ts: _Stream) -> Expr:
    expr = _parse_binary(ts, 0)
    if ts.check("?"):
        ts.next()
        then_val = _parse_expr(ts)
        ts.expect(":")
        else_val = _parse_expr(ts)
        return Ternary(expr, then_val, else_val)
    return expr


def _parse_binary(ts: _Stream, level: int) -> Expr:
    if level >= len(_BINARY_LEVELS):
        return _parse_unary(ts)
    lhs = _parse_binary(ts, level + 1)
    while True:
        tok = ts.peek()
        if tok is None or tok.kind != TokenKind.OP or tok.text not in _BINARY_LEVELS[level]:
            return lhs
        ts.next()
        rhs = _parse_binary(ts, level + 1)
        lhs = Binary(tok.text, lhs, rhs)


def _parse_unary(ts: _Stream) -> Expr:
    tok = ts.peek()
    if tok is not None and tok.kind == TokenKind.OP and tok.text in _UNARY_OPS:
        ts.next()
        operand = _parse_unary(ts)
        if tok.text == "+":
            return operand
        if tok.text == "-":
            return Binary("-", Number(0, None, "0"), operand)
        if tok.text in ("~&", "~|", "~^"):
            return Unary("!", Unary(tok.text[1], operand))
        return Unary(tok.text, operand)
    return _parse_primary(ts)


def _parse_primary(ts: _Stream) -> Expr:
    tok = ts.next()
    _reject_if_unsupported(tok)

    if tok.kind == TokenKind.NUMBER:
        return Number(int(tok.value or 0), tok.width, tok.text)

    if tok.text == "(":
        expr = _parse_expr(ts)
        ts.expect(")")
        return expr

    if tok.text == "{":
        first = ts.peek()
        parts = [_parse_expr(ts)]
        if ts.check("{"):
            assert first is not None
            raise UnsupportedConstruct("replication", first.line, first.column)
        while ts.accept(","):
            parts.append(_parse_expr(ts))
        ts.expect("}")
        return Concat(parts)

    if tok.kind == TokenKind.IDENT:
        if not ts.check("["):
            return Ident(tok.text)
        ts.next()
        inner = ts.peek()
        assert inner is not None
        if inner.kind == TokenKind.NUMBER and ts.peek(1) is not None and ts.peek(1).text == ":":
            msb = int(ts.next().value or 0)
            ts.next()  # ':'
            lsb_tok = ts.next()
            if lsb_tok.kind != TokenKind.NUMBER:
                raise UnsupportedConstruct("non-constant part-select bound", lsb_tok.line, lsb_tok.column)
            ts.expect("]")
            return PartSelect(tok.text, msb=msb, lsb=int(lsb_tok.value or 0))
        index = _parse_expr(ts)
        if ts.check(":"):
            raise UnsupportedConstruct("non-constant part-select bound", inner.line, inner.column)
        ts.expect("]")
        if isinstance(index, Number):
            return PartSelect(tok.text, msb=index.value, lsb=index.value)
        return PartSelect(tok.text, index=index)

    raise ParseError(tok.line, tok.column, "expression", tok.text)
