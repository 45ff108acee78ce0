import pytest

from structrtl.vast import Binary, Concat, Ident, IfStmt, Number, PartSelect, ProcAssign, Ternary, Unary
from structrtl.vparser import ParseError, UnsupportedConstruct, parse_source


def one_module(source):
    modules = parse_source(source)
    assert len(modules) == 1
    return modules[0]


def test_minimal_module():
    mod = one_module("module m(input a, output b); assign b = ~a; endmodule")
    assert mod.name == "m"
    assert [(p.name, p.direction, p.width) for p in mod.ports] == [("a", "input", 1), ("b", "output", 1)]
    (assign,) = mod.assigns
    assert assign.target == "b"
    assert assign.rhs == Unary("~", Ident("a"))


def test_one_ast_module_per_module_declaration():
    modules = parse_source(
        "module m1(input a, output b); assign b = a; endmodule\n"
        "module m2(input x, output y); assign y = x; endmodule"
    )
    assert [m.name for m in modules] == ["m1", "m2"]


def test_ansi_direction_carries_over_commas():
    mod = one_module("module m(input a, b, output c); assign c = a & b; endmodule")
    assert [(p.name, p.direction) for p in mod.ports] == [
        ("a", "input"),
        ("b", "input"),
        ("c", "output"),
    ]


def test_non_ansi_port_declarations():
    mod = one_module(
        "module m(a, b, c);\n"
        "  input [3:0] a;\n"
        "  input b;\n"
        "  output [3:0] c;\n"
        "  assign c = a;\n"
        "endmodule"
    )
    assert [(p.name, p.direction, p.width) for p in mod.ports] == [
        ("a", "input", 4),
        ("b", "input", 1),
        ("c", "output", 4),
    ]


def test_output_reg_in_header():
    mod = one_module(
        "module m(input clk, input d, output reg q);\n"
        "  always @(posedge clk) q <= d;\n"
        "endmodule"
    )
    assert [(n.name, n.kind) for n in mod.nets] == [("q", "reg")]


def test_posedge_always_block():
    mod = one_module(
        "module m(input clk, input d, output q);\n"
        "  reg r;\n"
        "  always @(posedge clk) r <= d;\n"
        "  assign q = r;\n"
        "endmodule"
    )
    (block,) = mod.always_blocks
    assert block.trigger == "posedge"
    assert block.clock == "clk"
    (stmt,) = block.body
    assert isinstance(stmt, ProcAssign)
    assert not stmt.blocking
    assert stmt.target == "r"


def count_eq(expr) -> int:
    if isinstance(expr, Binary):
        return (expr.op == "==") + count_eq(expr.lhs) + count_eq(expr.rhs)
    if isinstance(expr, Unary):
        return count_eq(expr.operand)
    if isinstance(expr, Ternary):
        return count_eq(expr.cond) + count_eq(expr.then_val) + count_eq(expr.else_val)
    return 0


def test_case_desugars_to_if_else_chain_of_eq():
    mod = one_module(
        "module m(input clk, input [1:0] sel, input a, input b, output q);\n"
        "  reg r;\n"
        "  always @(posedge clk)\n"
        "    case (sel)\n"
        "      2'd0: r <= a;\n"
        "      2'd1: r <= b;\n"
        "      default: r <= 1'b0;\n"
        "    endcase\n"
        "  assign q = r;\n"
        "endmodule"
    )
    (outer,) = mod.always_blocks[0].body
    assert isinstance(outer, IfStmt)
    assert count_eq(outer.cond) == 1
    (inner,) = outer.else_body
    assert isinstance(inner, IfStmt)
    assert count_eq(inner.cond) == 1
    assert isinstance(inner.else_body[0], ProcAssign)  # the default arm


def test_case_with_multiple_labels_uses_logical_or():
    mod = one_module(
        "module m(input clk, input [1:0] sel, input a, output q);\n"
        "  reg r;\n"
        "  always @(posedge clk)\n"
        "    case (sel)\n"
        "      2'd0, 2'd3: r <= a;\n"
        "      default: r <= 1'b0;\n"
        "    endcase\n"
        "  assign q = r;\n"
        "endmodule"
    )
    (outer,) = mod.always_blocks[0].body
    assert isinstance(outer.cond, Binary) and outer.cond.op == "||"
    assert count_eq(outer.cond) == 2


@pytest.mark.parametrize(
    "expr_text,expected",
    [
        ("a | b & c", Binary("|", Ident("a"), Binary("&", Ident("b"), Ident("c")))),
        ("a + b * c", Binary("+", Ident("a"), Binary("*", Ident("b"), Ident("c")))),
        ("a == b | c", Binary("|", Binary("==", Ident("a"), Ident("b")), Ident("c"))),
        ("a << 1 + 1", Binary("<<", Ident("a"), Binary("+", Number(1, None, "1"), Number(1, None, "1")))),
    ],
)
def test_operator_precedence(expr_text, expected):
    mod = one_module(f"module m(input a, input b, input c, output y); assign y = {expr_text}; endmodule")
    assert mod.assigns[0].rhs == expected


def test_ternary_is_weakest_and_right_nested():
    mod = one_module("module m(input s, input a, input b, output y); assign y = s ? a : s ? b : a; endmodule")
    rhs = mod.assigns[0].rhs
    assert isinstance(rhs, Ternary)
    assert isinstance(rhs.else_val, Ternary)


def test_unary_minus_desugars_to_zero_minus():
    mod = one_module("module m(input a, output y); assign y = -a; endmodule")
    rhs = mod.assigns[0].rhs
    assert rhs == Binary("-", Number(0, None, "0"), Ident("a"))


def test_negated_reduction_desugars():
    mod = one_module("module m(input [3:0] a, output y); assign y = ~&a; endmodule")
    assert mod.assigns[0].rhs == Unary("!", Unary("&", Ident("a")))


def test_part_select_forms():
    mod = one_module(
        "module m(input [7:0] a, input [2:0] i, output y, output z, output w);\n"
        "  assign y = a[3:0];\n"
        "  assign z = a[2];\n"
        "  assign w = a[i];\n"
        "endmodule"
    )
    assert mod.assigns[0].rhs == PartSelect("a", msb=3, lsb=0)
    assert mod.assigns[1].rhs == PartSelect("a", msb=2, lsb=2)
    assert mod.assigns[2].rhs == PartSelect("a", index=Ident("i"))


def test_concat():
    mod = one_module("module m(input a, input b, output [1:0] y); assign y = {a, b}; endmodule")
    assert mod.assigns[0].rhs == Concat([Ident("a"), Ident("b")])


def test_parse_error_carries_expected_and_found():
    with pytest.raises(ParseError) as err:
        parse_source("module m(input a, output b); assign b = a endmodule")
    assert err.value.expected == "';'"
    assert err.value.found == "endmodule"


def test_parse_error_on_garbage_item():
    with pytest.raises(ParseError) as err:
        parse_source("module m(input a); 42; endmodule")
    assert "module item" in err.value.expected


@pytest.mark.parametrize(
    "source,name",
    [
        ("module m(inout a); endmodule", "inout"),
        ("module m(input a); initial a = 0; endmodule", "initial"),
        ("module m(input a); generate endgenerate endmodule", "generate"),
        ("module m(input clk); always @(negedge clk) ; endmodule", "negedge"),
        ("module m(input a, output y); assign y = {2{a}}; endmodule", "replication"),
        ("module m(input a, output y); parameter W = 4; endmodule", "parameter"),
        ("module m(input clk, input a, input b); reg r; always @(posedge clk or posedge a) r <= b; endmodule", "sensitivity"),
        ("module m(input [3:0] a, output [3:0] y); assign y[1] = a[0]; endmodule", "part-select assignment"),
        ("module m(input a, input b, output x, output y); assign {x, y} = {a, b}; endmodule", "concatenation assignment"),
        ("module m(input clk, input a); reg r; always @(posedge clk) casez (a) 1'b1: r <= a; endcase endmodule", "casez"),
    ],
)
def test_unsupported_constructs(source, name):
    with pytest.raises(UnsupportedConstruct) as err:
        parse_source(source)
    assert name.split()[0] in str(err.value)


def test_undirected_header_port_is_an_error():
    with pytest.raises(ParseError):
        parse_source("module m(a); assign a = 1; endmodule")
