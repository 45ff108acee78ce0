"""AST -> CDFG lowering.

Every port and named net materializes as an Input/Output/Wire/Reg node;
expression operations become operator nodes wired operand->operator->result.
Registers may close cycles; clock signals are recorded as a Reg attribute and
contribute no data edges. Elaboration is deterministic: node ids follow
declaration order, then expression traversal order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cdfg import Cdfg, NodeType
from .vast import (
    AlwaysBlock,
    AstModule,
    Binary,
    Concat,
    Expr,
    HoldValue,
    Ident,
    IfStmt,
    Number,
    PartSelect,
    ProcAssign,
    Stmt,
    Ternary,
    Unary,
)

UNSIZED_LITERAL_WIDTH = 32


class ElaborationError(ValueError):
    def __init__(self, message: str, line: int = 0):
        self.message = message
        self.line = line
        super().__init__(f"{line}: {message}" if line else message)


_UNARY_TYPES = {
    "!": NodeType.LNot,
    "~": NodeType.Not,
    "^": NodeType.URxor,
    "&": NodeType.URand,
    "|": NodeType.URor,
}

_BINARY_TYPES = {
    "<": NodeType.Lt,
    "<=": NodeType.Le,
    ">": NodeType.Gt,
    ">=": NodeType.Ge,
    "+": NodeType.Add,
    "-": NodeType.Sub,
    "*": NodeType.Mul,
    "/": NodeType.Div,
    "%": NodeType.Mod,
    "<<": NodeType.ShiftLeft,
    ">>": NodeType.ShiftRight,
    "&&": NodeType.And,
    "||": NodeType.Or,
    "==": NodeType.Eq,
    "!=": NodeType.Neq,
    "&": NodeType.BitAnd,
    "|": NodeType.BitOr,
    "^": NodeType.BitXor,
    "~^": NodeType.BitNXor,
    "^~": NodeType.BitNXor,
}

# Result width 1 regardless of operands: comparisons, logical ops, reductions.
_WIDTH_ONE_TYPES = {
    NodeType.LNot, NodeType.URxor, NodeType.URand, NodeType.URor,
    NodeType.Lt, NodeType.Le, NodeType.Gt, NodeType.Ge,
    NodeType.And, NodeType.Or, NodeType.Eq, NodeType.Neq,
}


@dataclass
class _Signal:
    kind: str  # input | output | wire | reg | output_reg
    node: int
    width: int
    reg_node: int | None = None  # Reg node backing an output reg


class _Elaborator:
    def __init__(self, ast: AstModule):
        self.ast = ast
        self.g = Cdfg()
        self.signals: dict[str, _Signal] = {}
        self.drivers: dict[str, int] = {}

    def run(self) -> Cdfg:
        self._declare_ports()
        self._declare_nets()
        for assign in self.ast.assigns:
            self._elab_cont_assign(assign)
        for block in self.ast.always_blocks:
            self._elab_always(block)
        self._final_checks()
        return self.g

    # -- declarations ------------------------------------------------------

    def _declare_ports(self) -> None:
        for port in self.ast.ports:
            if port.name in self.signals:
                raise ElaborationError(f"duplicate port {port.name!r}", port.line)
            if port.direction == "input":
                node = self.g.add_node(NodeType.Input, port.width, name=port.name)
                self.signals[port.name] = _Signal("input", node, port.width)
            else:
                node = self.g.add_node(NodeType.Output, port.width, name=port.name)
                self.signals[port.name] = _Signal("output", node, port.width)
            self.drivers[port.name] = 0

    def _declare_nets(self) -> None:
        for net in self.ast.nets:
            sig = self.signals.get(net.name)
            if sig is None:
                ntype = NodeType.Wire if net.kind == "wire" else NodeType.Reg
                node = self.g.add_node(ntype, net.width, name=net.name)
                self.signals[net.name] = _Signal(net.kind, node, net.width)
                self.drivers[net.name] = 0
                continue
            # Re-declaration of a port name refines the port.
            if sig.kind == "output" and net.kind == "reg":
                if net.width != sig.width:
                    raise ElaborationError(
                        f"width mismatch between port and reg declaration of {net.name!r}", net.line
                    )
                reg = self.g.add_node(NodeType.Reg, sig.width, name=net.name)
                self.g.add_edge(reg, sig.node, 0)
                sig.kind = "output_reg"
                sig.reg_node = reg
            elif sig.kind in ("input", "output") and net.kind == "wire":
                if net.width != sig.width:
                    raise ElaborationError(
                        f"width mismatch between port and wire declaration of {net.name!r}", net.line
                    )
            elif sig.kind == "input" and net.kind == "reg":
                raise ElaborationError(f"input port {net.name!r} declared reg", net.line)
            else:
                raise ElaborationError(f"duplicate declaration of {net.name!r}", net.line)

    # -- continuous assigns --------------------------------------------------

    def _elab_cont_assign(self, assign) -> None:
        sig = self.signals.get(assign.target)
        if sig is None:
            raise ElaborationError(f"assignment to undeclared signal {assign.target!r}", assign.line)
        if sig.kind in ("reg", "output_reg"):
            raise ElaborationError(f"continuous assignment to reg {assign.target!r}", assign.line)
        if sig.kind == "input":
            raise ElaborationError(f"assignment to input port {assign.target!r}", assign.line)
        root, _ = self._elab_expr(assign.rhs, assign.line)
        self.g.add_edge(root, sig.node, 0)
        self.drivers[assign.target] += 1

    # -- always blocks -------------------------------------------------------

    def _elab_always(self, block: AlwaysBlock) -> None:
        if block.trigger == "posedge":
            assert block.clock is not None
            if block.clock not in self.signals:
                raise ElaborationError(f"undeclared clock {block.clock!r}", block.line)
        env: dict[str, Expr] = {}
        self._exec_stmts(block.body, env, block)
        for name in env:
            sig = self.signals[name]
            reg = sig.reg_node if sig.kind == "output_reg" else sig.node
            assert reg is not None
            if block.trigger == "posedge":
                self.g.nodes[reg].attrs["clock"] = block.clock
        for name, expr in env.items():
            sig = self.signals[name]
            reg = sig.reg_node if sig.kind == "output_reg" else sig.node
            assert reg is not None
            root, _ = self._elab_expr(expr, block.line)
            self.g.add_edge(root, reg, 0)
            self.drivers[name] += 1

    def _exec_stmts(self, stmts: list[Stmt], env: dict[str, Expr], block: AlwaysBlock) -> None:
        """Symbolically execute a statement list, building one value per target."""
        comb = block.trigger == "comb"
        for stmt in stmts:
            if isinstance(stmt, ProcAssign):
                if comb and not stmt.blocking:
                    raise ElaborationError(
                        "non-blocking assignment in combinational block", stmt.line
                    )
                if not comb and stmt.blocking:
                    raise ElaborationError("blocking assignment in clocked block", stmt.line)
                sig = self.signals.get(stmt.target)
                if sig is None:
                    raise ElaborationError(f"assignment to undeclared signal {stmt.target!r}", stmt.line)
                if sig.kind not in ("reg", "output_reg"):
                    raise ElaborationError(
                        f"procedural assignment to non-reg {stmt.target!r}", stmt.line
                    )
                # Blocking reads see earlier in-block values; non-blocking reads
                # see pre-block register state, so no substitution there.
                env[stmt.target] = self._subst(stmt.rhs, env, stmt.line) if comb else stmt.rhs
            elif isinstance(stmt, IfStmt):
                cond = self._subst(stmt.cond, env, stmt.line) if comb else stmt.cond
                env_t = dict(env)
                env_e = dict(env)
                self._exec_stmts(stmt.then_body, env_t, block)
                self._exec_stmts(stmt.else_body, env_e, block)
                for name in sorted(set(env_t) | set(env_e)):
                    vt = env_t.get(name, HoldValue(name))
                    ve = env_e.get(name, HoldValue(name))
                    if vt is ve:
                        continue  # untouched by either branch
                    env[name] = Ternary(cond, vt, ve)
            else:  # pragma: no cover - parser emits only ProcAssign/IfStmt
                raise ElaborationError(f"unsupported statement {type(stmt).__name__}")

    def _subst(self, expr: Expr, env: dict[str, Expr], line: int) -> Expr:
        """Inline earlier blocking assignments into a read expression."""
        if not env:
            return expr
        if isinstance(expr, Ident):
            return env.get(expr.name, expr)
        if isinstance(expr, Number) or isinstance(expr, HoldValue):
            return expr
        if isinstance(expr, Unary):
            return Unary(expr.op, self._subst(expr.operand, env, line))
        if isinstance(expr, Binary):
            return Binary(expr.op, self._subst(expr.lhs, env, line), self._subst(expr.rhs, env, line))
        if isinstance(expr, Ternary):
            return Ternary(
                self._subst(expr.cond, env, line),
                self._subst(expr.then_val, env, line),
                self._subst(expr.else_val, env, line),
            )
        if isinstance(expr, Concat):
            return Concat([self._subst(p, env, line) for p in expr.parts])
        if isinstance(expr, PartSelect):
            if expr.name in env:
                raise ElaborationError(
                    f"part-select of {expr.name!r} assigned earlier in the same block", line
                )
            if expr.index is not None:
                return PartSelect(expr.name, index=self._subst(expr.index, env, line))
            return expr
        raise ElaborationError(f"unsupported expression {type(expr).__name__}", line)

    # -- expressions ---------------------------------------------------------

    def _read_node(self, name: str, line: int) -> tuple[int, int]:
        sig = self.signals.get(name)
        if sig is None:
            raise ElaborationError(f"undeclared identifier {name!r}", line)
        if sig.kind == "output":
            raise ElaborationError(f"read of output port {name!r}", line)
        node = sig.reg_node if sig.kind == "output_reg" else sig.node
        assert node is not None
        return node, sig.width

    def _elab_expr(self, expr: Expr, line: int) -> tuple[int, int]:
        """Returns (node id, width) of the elaborated expression root."""
        if isinstance(expr, Number):
            width = expr.width if expr.width is not None else UNSIZED_LITERAL_WIDTH
            node = self.g.add_node(NodeType.Const, width, value=expr.value)
            return node, width

        if isinstance(expr, Ident):
            return self._read_node(expr.name, line)

        if isinstance(expr, HoldValue):
            return self._read_node(expr.name, line)

        if isinstance(expr, Unary):
            op_node, op_width = self._elab_expr(expr.operand, line)
            ntype = _UNARY_TYPES[expr.op]
            width = 1 if ntype in _WIDTH_ONE_TYPES else op_width
            node = self.g.add_node(ntype, width)
            self.g.add_edge(op_node, node, 0)
            return node, width

        if isinstance(expr, Binary):
            lhs_node, lhs_w = self._elab_expr(expr.lhs, line)
            rhs_node, rhs_w = self._elab_expr(expr.rhs, line)
            ntype = _BINARY_TYPES[expr.op]
            if ntype in _WIDTH_ONE_TYPES:
                width = 1
            elif ntype in (NodeType.ShiftLeft, NodeType.ShiftRight):
                width = lhs_w  # self-determined: shift takes the left operand width
            else:
                width = max(lhs_w, rhs_w)
            node = self.g.add_node(ntype, width)
            self.g.add_edge(lhs_node, node, 0)
            self.g.add_edge(rhs_node, node, 1)
            return node, width

        if isinstance(expr, Ternary):
            cond_node, _ = self._elab_expr(expr.cond, line)
            then_node, then_w = self._elab_expr(expr.then_val, line)
            else_node, else_w = self._elab_expr(expr.else_val, line)
            width = max(then_w, else_w)
            node = self.g.add_node(NodeType.Cond, width)
            self.g.add_edge(cond_node, node, 0)
            self.g.add_edge(then_node, node, 1)
            self.g.add_edge(else_node, node, 2)
            return node, width

        if isinstance(expr, Concat):
            parts = [self._elab_expr(p, line) for p in expr.parts]
            width = sum(w for _, w in parts)
            if width < 1:
                raise ElaborationError("zero-width concatenation", line)
            node = self.g.add_node(NodeType.Concat, width)
            for idx, (part_node, _) in enumerate(parts):
                self.g.add_edge(part_node, node, idx)
            return node, width

        if isinstance(expr, PartSelect):
            base_node, base_w = self._read_node(expr.name, line)
            if expr.index is None:
                assert expr.msb is not None and expr.lsb is not None
                width = expr.msb - expr.lsb + 1
                if width < 1:
                    raise ElaborationError(
                        f"zero-width part-select {expr.name}[{expr.msb}:{expr.lsb}]", line
                    )
                if expr.msb >= base_w:
                    raise ElaborationError(
                        f"part-select [{expr.msb}:{expr.lsb}] exceeds width of {expr.name!r}", line
                    )
                node = self.g.add_node(NodeType.PartSelect, width, msb=expr.msb, lsb=expr.lsb)
                self.g.add_edge(base_node, node, 0)
                return node, width
            idx_node, _ = self._elab_expr(expr.index, line)
            node = self.g.add_node(NodeType.PartSelect, 1)
            self.g.add_edge(base_node, node, 0)
            self.g.add_edge(idx_node, node, 1)
            return node, 1

        raise ElaborationError(f"unsupported expression {type(expr).__name__}", line)

    # -- final checks ----------------------------------------------------------

    def _final_checks(self) -> None:
        for name, count in self.drivers.items():
            if count > 1:
                raise ElaborationError(f"multiply-driven signal {name!r}")
        for port in self.ast.ports:
            if port.direction == "output" and self.drivers[port.name] == 0:
                raise ElaborationError(f"undriven output {port.name!r}")


def elaborate(ast: AstModule) -> Cdfg:
    """Lower one module to its CDFG."""
    return _Elaborator(ast).run()


def compile_verilog(source: str) -> Cdfg:
    """Tokenize, parse, and elaborate a single-module source text."""
    from .vparser import UnsupportedConstruct, parse_source

    modules = parse_source(source)
    if len(modules) != 1:
        raise UnsupportedConstruct(f"expected exactly one module, found {len(modules)}")
    return elaborate(modules[0])
