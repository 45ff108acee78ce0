"""Tokenizer for the supported Verilog subset.

Comments are stripped; every token records its 1-based line/column so errors
and source reconstruction stay exact. Sized literals (4'b1010, 8'hFF, 3'd7)
are decoded into (width, value) during lexing.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class TokenKind(Enum):
    KEYWORD = "keyword"
    IDENT = "identifier"
    NUMBER = "number-literal"
    OP = "operator"
    PUNCT = "punctuation"


# Subset keywords plus reserved words we recognize only to reject cleanly.
KEYWORDS = frozenset(
    {
        "module", "endmodule", "input", "output", "inout", "wire", "reg",
        "assign", "always", "begin", "end", "if", "else", "case", "casex",
        "casez", "endcase", "default", "posedge", "negedge", "or",
        "parameter", "localparam", "integer", "initial", "for", "while",
        "function", "endfunction", "task", "endtask", "generate",
        "endgenerate", "genvar", "signed",
    }
)

# Longest-match first.
_MULTI_OPS = (
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "~^", "^~", "~&", "~|",
)
_SINGLE_OPS = "+-*/%&|^~!<>=?:"
_PUNCT = "()[]{};,@#."

_BASE_RADIX = {"b": 2, "o": 8, "d": 10, "h": 16}
_BASE_DIGITS = {
    "b": "01",
    "o": "01234567",
    "d": "0123456789",
    "h": "0123456789abcdef",
}


@dataclass
class Token:
    kind: TokenKind
    text: str
    line: int
    column: int
    # Populated for NUMBER tokens; width is None for unsized literals.
    width: int | None = None
    value: int | None = None

    def __repr__(self) -> str:
        return f"Token({self.kind.value}, {self.text!r}, L{self.line}:{self.column})"


class LexError(ValueError):
    def __init__(self, line: int, column: int, message: str):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"{line}:{column}: {message}")


def strip_comments(source: str) -> str:
    """Replace // and /* */ comments with spaces, preserving all newlines."""
    out = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                out.append(" ")
                i += 1
        elif ch == "/" and i + 1 < n and source[i + 1] == "*":
            j = source.find("*/", i + 2)
            if j < 0:
                j = n
                end = n
            else:
                end = j + 2
            for k in range(i, end):
                out.append("\n" if source[k] == "\n" else " ")
            i = end
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def peek(self, ahead: int = 0) -> str:
        p = self.pos + ahead
        return self.text[p] if p < len(self.text) else ""

    def advance(self, count: int = 1) -> str:
        taken = self.text[self.pos : self.pos + count]
        for ch in taken:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += count
        return taken


def tokenize(source: str) -> list[Token]:
    """Lex `source` into tokens, raising LexError on malformed input."""
    sc = _Scanner(strip_comments(source))
    tokens: list[Token] = []

    while sc.pos < len(sc.text):
        ch = sc.peek()
        if ch in " \t\r\n":
            sc.advance()
            continue

        line, col = sc.line, sc.col

        if ch.isalpha() or ch == "_":
            start = sc.pos
            while sc.peek() and (sc.peek().isalnum() or sc.peek() in "_$"):
                sc.advance()
            text = sc.text[start : sc.pos]
            kind = TokenKind.KEYWORD if text in KEYWORDS else TokenKind.IDENT
            tokens.append(Token(kind, text, line, col))
            continue

        if ch.isdigit() or ch == "'":
            tokens.append(_lex_number(sc, line, col))
            continue

        two = sc.peek() + sc.peek(1)
        if two in _MULTI_OPS:
            sc.advance(2)
            tokens.append(Token(TokenKind.OP, two, line, col))
            continue

        if ch in _SINGLE_OPS:
            sc.advance()
            tokens.append(Token(TokenKind.OP, ch, line, col))
            continue

        if ch in _PUNCT:
            sc.advance()
            tokens.append(Token(TokenKind.PUNCT, ch, line, col))
            continue

        raise LexError(line, col, f"illegal character {ch!r}")

    return tokens


def _lex_number(sc: _Scanner, line: int, col: int) -> Token:
    start = sc.pos
    while sc.peek().isdigit() or sc.peek() == "_":
        sc.advance()

    if sc.peek() != "'":
        text = sc.text[start : sc.pos]
        return Token(TokenKind.NUMBER, text, line, col, width=None, value=int(text.replace("_", "")))

    width_text = sc.text[start : sc.pos].replace("_", "")
    width = int(width_text) if width_text else None
    if width == 0:
        raise LexError(line, col, "literal width must be positive")
    sc.advance()  # the apostrophe

    base_ch = sc.peek().lower()
    if base_ch not in _BASE_RADIX:
        raise LexError(sc.line, sc.col, f"invalid base character {sc.peek()!r} in sized literal")
    sc.advance()

    digits_start = sc.pos
    allowed = _BASE_DIGITS[base_ch]
    while sc.peek() and (sc.peek().lower() in allowed or sc.peek() == "_"):
        sc.advance()
    digits = sc.text[digits_start : sc.pos].replace("_", "")
    if not digits:
        raise LexError(sc.line, sc.col, "sized literal has no digits")
    # Reject digits legal for a wider base, e.g. 4'b102.
    nxt = sc.peek()
    if nxt and (nxt.isalnum() or nxt == "_"):
        raise LexError(sc.line, sc.col, f"invalid digit {nxt!r} for base '{base_ch}'")

    value = int(digits, _BASE_RADIX[base_ch])
    if width is not None:
        value &= (1 << width) - 1
    text = sc.text[start : sc.pos]
    return Token(TokenKind.NUMBER, text, line, col, width=width, value=value)
