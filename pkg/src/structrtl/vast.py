"""AST for the supported Verilog subset.

Case statements never appear here: the parser desugars them into if/else
chains of equality comparisons, keeping the expression vocabulary closed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


@dataclass
class Number:
    value: int
    width: int | None  # None for unsized literals (treated as 32-bit)
    text: str = ""


@dataclass
class Ident:
    name: str


@dataclass
class Unary:
    op: str  # "!", "~", "^", "&", "|"
    operand: "Expr"


@dataclass
class Binary:
    op: str  # "+", "-", ..., "&&", "<<"
    lhs: "Expr"
    rhs: "Expr"


@dataclass
class Ternary:
    cond: "Expr"
    then_val: "Expr"
    else_val: "Expr"


@dataclass
class Concat:
    parts: list["Expr"]


@dataclass
class PartSelect:
    """id[msb:lsb] when msb/lsb are set, id[index] when index is set."""

    name: str
    msb: int | None = None
    lsb: int | None = None
    index: "Expr | None" = None


@dataclass
class HoldValue:
    """Placeholder for 'keep the previous register value' in unassigned branches."""

    name: str


Expr = Union[Number, Ident, Unary, Binary, Ternary, Concat, PartSelect, HoldValue]


@dataclass
class Port:
    name: str
    direction: str  # "input" | "output"
    width: int
    line: int = 0


@dataclass
class NetDecl:
    name: str
    kind: str  # "wire" | "reg"
    width: int
    line: int = 0


@dataclass
class ContAssign:
    target: str
    rhs: Expr
    line: int = 0


@dataclass
class ProcAssign:
    target: str
    rhs: Expr
    blocking: bool
    line: int = 0


@dataclass
class IfStmt:
    cond: Expr
    then_body: list["Stmt"]
    else_body: list["Stmt"]
    line: int = 0


Stmt = Union[ProcAssign, IfStmt]


@dataclass
class AlwaysBlock:
    trigger: str  # "posedge" | "comb"
    clock: str | None  # clock signal name for posedge blocks
    body: list[Stmt]
    line: int = 0


@dataclass
class AstModule:
    name: str
    ports: list[Port] = field(default_factory=list)
    nets: list[NetDecl] = field(default_factory=list)
    assigns: list[ContAssign] = field(default_factory=list)
    always_blocks: list[AlwaysBlock] = field(default_factory=list)
