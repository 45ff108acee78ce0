"""Dataset plumbing: manifests, deterministic splits, the synthetic design
generator, the analytic label oracle, and netlist stub generation.

The oracle stands in for a real synthesis flow: area is a per-type cost times
width summed over nodes, delay is the longest register-cut path under
per-type unit delays. Netlist stubs expand each CDFG node into a per-bit lane
of library cells wired to mirror the graph topology, so the teacher sees a
gate-level view consistent with the oracle labels. Real labels and netlists
can be supplied through the same manifest to override all of this.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cdfg import Cdfg, NodeType, _comb_subgraph
from .elaborate import compile_verilog
from .pm_netlist import (
    CellLibrary,
    NetlistItem,
    cell_features,
    default_library,
    library_to_json,
    netlist_graph,
    parse_netlist,
)
from .pretrain import GraphSample, prepare_sample
from .quality import QualityItem, log_transform


@dataclass
class DesignRecord:
    design_id: str
    verilog: str
    netlist: str | None
    area: float
    delay: float
    split: str = ""


# -- manifest i/o -----------------------------------------------------------

MANIFEST_HEADER = ["design_id", "verilog", "netlist", "area", "delay"]


def write_manifest(path: str | Path, records: list[DesignRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for r in records:
            writer.writerow([r.design_id, r.verilog, r.netlist or "", f"{r.area:.6f}", f"{r.delay:.6f}"])


def load_manifest(path: str | Path) -> list[DesignRecord]:
    path = Path(path)
    base = path.parent
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MANIFEST_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"manifest missing columns: {missing}")
        for row in reader:
            netlist = row["netlist"].strip()
            records.append(
                DesignRecord(
                    design_id=row["design_id"],
                    verilog=str(base / row["verilog"]),
                    netlist=str(base / netlist) if netlist else None,
                    area=float(row["area"]),
                    delay=float(row["delay"]),
                )
            )
    return records


def assign_splits(records: list[DesignRecord], ratio: float = 0.8, seed: int = 0) -> list[DesignRecord]:
    """Deterministic shuffle; round(ratio * N) records become 'train'."""
    ordered = sorted(records, key=lambda r: r.design_id)
    perm = np.random.default_rng(seed).permutation(len(ordered))
    n_train = int(round(ratio * len(ordered)))
    for rank, idx in enumerate(perm):
        ordered[idx].split = "train" if rank < n_train else "val"
    return records


# -- analytic label oracle ---------------------------------------------------

# Per-node gate expansions (cells per bit of width). Cell-less node types get
# flat per-bit costs below.
GATE_TEMPLATES: dict[NodeType, list[str]] = {
    NodeType.LNot: ["INV"],
    NodeType.Not: ["INV"],
    NodeType.URxor: ["XOR2"],
    NodeType.URand: ["AND2"],
    NodeType.URor: ["OR2"],
    NodeType.Lt: ["XOR2", "AND2", "OR2"],
    NodeType.Le: ["XOR2", "AND2", "OR2"],
    NodeType.Gt: ["XOR2", "AND2", "OR2"],
    NodeType.Ge: ["XOR2", "AND2", "OR2"],
    NodeType.Add: ["XOR2", "XOR2", "AND2", "AND2", "OR2"],
    NodeType.Sub: ["XOR2", "XOR2", "AND2", "AND2", "OR2", "INV"],
    NodeType.Mul: ["AND2", "XOR2", "AND2", "XOR2", "AND2", "OR2"],
    NodeType.Div: ["XOR2", "AND2", "OR2", "NAND2", "XOR2", "AND2", "OR2", "INV"],
    NodeType.Mod: ["XOR2", "AND2", "OR2", "NAND2", "XOR2", "AND2", "OR2"],
    NodeType.ShiftLeft: ["AND2", "OR2"],
    NodeType.ShiftRight: ["AND2", "OR2"],
    NodeType.And: ["AND2"],
    NodeType.Or: ["OR2"],
    NodeType.Eq: ["XOR2", "NOR2"],
    NodeType.Neq: ["XOR2", "OR2"],
    NodeType.BitAnd: ["AND2"],
    NodeType.BitOr: ["OR2"],
    NodeType.BitXor: ["XOR2"],
    NodeType.BitNXor: ["XOR2", "INV"],
    NodeType.PartSelect: ["BUF"],
    NodeType.Concat: ["BUF"],
    NodeType.Cond: ["INV", "AND2", "AND2", "OR2"],
    NodeType.Wire: ["BUF"],
    NodeType.Const: [],
    NodeType.Input: [],
    NodeType.Output: [],
    NodeType.Reg: ["DFF"],
}

_FLAT_AREA = {NodeType.Input: 0.5, NodeType.Output: 0.5, NodeType.Const: 0.25}
_FLAT_DELAY = {NodeType.Input: 0.1, NodeType.Output: 0.1, NodeType.Const: 0.05}
BASE_DELAY = 0.2


def node_area_cost(node_type: NodeType, library: CellLibrary) -> float:
    template = GATE_TEMPLATES[node_type]
    if not template:
        return _FLAT_AREA[node_type]
    return sum(library.cells[name].area for name in template)


def node_delay_cost(node_type: NodeType, library: CellLibrary) -> float:
    template = GATE_TEMPLATES[node_type]
    if not template:
        return _FLAT_DELAY[node_type]
    return sum(library.cells[name].pin_delays[0] for name in template)


def label_oracle(g: Cdfg, library: CellLibrary) -> tuple[float, float]:
    """Deterministic analytic (area, delay) labels; both strictly positive.

    Area sums per-type cost times width over all nodes. Delay is the base
    delay plus the heaviest register-cut path, where each node on the path
    contributes its per-type unit delay.
    """
    area = sum(node_area_cost(n.node_type, library) * n.width for n in g.nodes)

    keep, adj = _comb_subgraph(g)
    weight = {i: node_delay_cost(g.nodes[i].node_type, library) for i in keep}
    indeg = {i: 0 for i in keep}
    for i in keep:
        for j in adj[i]:
            indeg[j] += 1
    queue = [i for i in keep if indeg[i] == 0]
    order = []
    while queue:
        i = queue.pop()
        order.append(i)
        for j in adj[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(j)
    dist = {i: weight[i] for i in keep}
    for i in order:
        for j in adj[i]:
            if dist[i] + weight[j] > dist[j]:
                dist[j] = dist[i] + weight[j]
    longest = max(dist.values(), default=0.0)
    return area, BASE_DELAY + longest


# -- netlist stubs -----------------------------------------------------------


def generate_netlist_stub(g: Cdfg, library: CellLibrary) -> dict:
    """Expand a CDFG into a schema-valid cell netlist.

    Each node becomes `width` parallel lanes of its gate template, chained
    within a lane; lane inputs connect to predecessor groups lane-wise, extra
    fan-in is absorbed by appending OR2 combiners, and spare pins tie low.
    """
    preds: dict[int, list[tuple[int, int]]] = {n.id: [] for n in g.nodes}
    for e in g.edges:
        preds[e.dst].append((e.op_idx, e.src))
    for dsts in preds.values():
        dsts.sort()

    cells: list[dict] = []
    inputs: list[str] = []
    outputs: list[str] = []
    used_tie = False
    used_clk = False
    counter = 0

    def fresh_net() -> str:
        nonlocal counter
        counter += 1
        return f"n{counter}"

    group_out: dict[int, list[str]] = {}

    def add_cell(ctype: str) -> dict:
        cell = {"id": len(cells), "type": ctype, "pins": {}}
        cells.append(cell)
        return cell

    # Pass 1: create cells and output nets.
    lane_cells: dict[int, list[list[dict]]] = {}
    for node in g.nodes:
        template = GATE_TEMPLATES[node.node_type]
        if node.node_type == NodeType.Input:
            group_out[node.id] = [f"pi{node.id}_{lane}" for lane in range(node.width)]
            inputs.extend(group_out[node.id])
            continue
        if node.node_type == NodeType.Const:
            used_tie = True
            group_out[node.id] = ["tie0"] * node.width
            continue
        if node.node_type == NodeType.Output:
            group_out[node.id] = []
            continue

        n_preds = len(preds[node.id])
        lanes: list[list[dict]] = []
        outs: list[str] = []
        for _ in range(node.width):
            chain = [add_cell(ctype) for ctype in template]
            free = _free_slots(chain, library)
            while free < n_preds:
                chain.append(add_cell("OR2"))
                free += 1
            # wire the internal chain: first input pin of each next cell
            for a, b in zip(chain, chain[1:]):
                net = fresh_net()
                a["pins"][_outpin(a, library)] = net
                b["pins"][library.cells[b["type"]].input_pins[0]] = net
            out_net = fresh_net()
            chain[-1]["pins"][_outpin(chain[-1], library)] = out_net
            outs.append(out_net)
            lanes.append(chain)
        lane_cells[node.id] = lanes
        group_out[node.id] = outs

    # Pass 2: connect predecessor nets into free pins.
    for node in g.nodes:
        if node.id not in lane_cells:
            if node.node_type == NodeType.Output:
                for _, src in preds[node.id]:
                    src_out = group_out[src]
                    for lane in range(node.width):
                        outputs.append(src_out[min(lane, len(src_out) - 1)] if src_out else "tie0")
            continue
        for lane_no, chain in enumerate(lane_cells[node.id]):
            feed = []
            for _, src in preds[node.id]:
                src_out = group_out[src]
                if not src_out:
                    used_tie = True
                    feed.append("tie0")
                else:
                    feed.append(src_out[min(lane_no, len(src_out) - 1)])
            slots = _free_pin_list(chain, library)
            for pin_ref, net in zip(slots, feed):
                cell, pin = pin_ref
                cell["pins"][pin] = net
            for cell, pin in slots[len(feed) :]:
                used_tie = True
                cell["pins"][pin] = "tie0"
            # clock pins
            for cell in chain:
                cdef = library.cells[cell["type"]]
                if cdef.sequential:
                    used_clk = True
                    cell["pins"]["C"] = "clk"

    if used_clk:
        inputs.append("clk")
    if used_tie:
        inputs.append("tie0")
    return {"cells": cells, "inputs": inputs, "outputs": outputs}


def _outpin(cell: dict, library: CellLibrary) -> str:
    pin = library.cells[cell["type"]].output_pin
    assert pin is not None
    return pin


def _free_slots(chain: list[dict], library: CellLibrary) -> int:
    total = 0
    for i, cell in enumerate(chain):
        cdef = library.cells[cell["type"]]
        n_in = len([p for p in cdef.input_pins if p != "C"])
        total += n_in if i == 0 else max(n_in - 1, 0)
    return total


def _free_pin_list(chain: list[dict], library: CellLibrary) -> list[tuple[dict, str]]:
    slots = []
    for cell in chain:
        cdef = library.cells[cell["type"]]
        for pin in cdef.input_pins:
            if pin == "C":
                continue
            if pin not in cell["pins"]:
                slots.append((cell, pin))
    return slots


# -- synthetic Verilog generator ----------------------------------------------

SIZE_CLASSES = ("tiny", "small", "medium")
_STMT_BUDGET = {"tiny": (2, 7), "small": (8, 38), "medium": (40, 115)}
_NODE_CAPS = {"tiny": 30, "small": 200, "medium": 600}
_WIDTHS = (1, 1, 1, 2, 2, 4, 4, 8)


def generate_design(rng: random.Random, size_class: str, name: str = "gen") -> str:
    """Random module in the supported subset; always parses and elaborates."""
    if size_class not in SIZE_CLASSES:
        raise ValueError(f"unknown size class {size_class!r}")
    lo, hi = _STMT_BUDGET[size_class]
    budget = rng.randint(lo, hi)
    cap = _NODE_CAPS[size_class]
    text = ""
    for _ in range(8):
        text = _build_module(rng, budget, name)
        g = compile_verilog(text)
        if g.num_nodes <= cap:
            return text
        budget = max(1, int(budget * 0.7))
    return text


class _ModuleBuilder:
    def __init__(self, rng: random.Random, name: str):
        self.rng = rng
        self.name = name
        self.pool: list[tuple[str, int]] = []  # readable (signal, width)
        self.decls: list[str] = []
        self.body: list[str] = []
        self.counter = 0

    def pick_signal(self, min_width: int = 1) -> tuple[str, int]:
        candidates = [s for s in self.pool if s[1] >= min_width]
        if not candidates:
            candidates = self.pool
        return self.rng.choice(candidates)

    def const(self, width: int | None = None) -> str:
        w = width or self.rng.choice(_WIDTHS)
        return f"{w}'d{self.rng.randrange(1 << min(w, 16))}"

    def leaf(self) -> str:
        if self.pool and self.rng.random() < 0.9:
            return self.pick_signal()[0]
        return self.const()

    def cond_expr(self) -> str:
        roll = self.rng.random()
        one_bit = [s for s, w in self.pool if w == 1]
        if roll < 0.3:
            sig, w = self.pick_signal()
            return f"({sig} == {self.const(w)})"
        if roll < 0.4:
            a, _ = self.pick_signal()
            b, _ = self.pick_signal()
            return f"({a} != {b})"
        if one_bit and roll < 0.8:
            return self.rng.choice(one_bit)
        sig, _ = self.pick_signal()
        return f"(|{sig})"

    def expr(self, depth: int) -> str:
        if depth <= 0 or not self.pool:
            return self.leaf()
        r = self.rng.random()
        sub = lambda: self.expr(depth - 1) if self.rng.random() < 0.45 else self.leaf()
        if r < 0.34:
            op = self.rng.choice(["&", "|", "^", "&", "^", "~^"])
            return f"({sub()} {op} {sub()})"
        if r < 0.47:
            op = self.rng.choice(["+", "+", "-", "*"] if self.rng.random() < 0.9 else ["/", "%"])
            rhs = self.const() if op in ("/", "%") else sub()
            return f"({sub()} {op} {rhs})"
        if r < 0.58:
            op = self.rng.choice(["==", "==", "!=", "<", ">=", ">", "<="])
            sig, w = self.pick_signal()
            rhs = self.const(w) if self.rng.random() < 0.4 else self.pick_signal()[0]
            return f"({sig} {op} {rhs})"
        if r < 0.68:
            return f"({self.cond_expr()} ? {sub()} : {sub()})"
        if r < 0.74:
            op = self.rng.choice(["~", "!", "&", "|", "^"])
            return f"({op}{self.leaf()})"
        if r < 0.80:
            return f"{{{sub()}, {sub()}}}"
        if r < 0.90:
            sig, w = self.pick_signal(min_width=2)
            if w >= 2:
                lsb = self.rng.randrange(w)
                msb = self.rng.randrange(lsb, w)
                return f"{sig}[{msb}:{lsb}]" if msb > lsb else f"{sig}[{msb}]"
            return sig
        if r < 0.95:
            op = self.rng.choice(["<<", ">>"])
            sig, w = self.pick_signal()
            return f"({sig} {op} {self.rng.randrange(max(w, 1))})"
        return f"({self.leaf()} {self.rng.choice(['&&', '||'])} {self.leaf()})"

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def range_decl(self, width: int) -> str:
        return f"[{width - 1}:0] " if width > 1 else ""

    def add_wire_assign(self) -> None:
        name = self.fresh("s")
        if self.pool and self.rng.random() < 0.3:
            # plain alias net, the most common kind of intermediate wire
            sig, w = self.pick_signal()
            self.decls.append(f"  wire {self.range_decl(w)}{name};")
            self.body.append(f"  assign {name} = {sig};")
        else:
            w = self.rng.choice(_WIDTHS)
            self.decls.append(f"  wire {self.range_decl(w)}{name};")
            depth = 1 if self.rng.random() < 0.72 else 2
            self.body.append(f"  assign {name} = {self.expr(depth)};")
        self.pool.append((name, w))

    def add_register(self) -> None:
        w = self.rng.choice(_WIDTHS)
        name = self.fresh("r")
        self.decls.append(f"  reg {self.range_decl(w)}{name};")
        self.pool.append((name, w))  # registers may read themselves
        roll = self.rng.random()
        if roll < 0.40:
            stmt = f"{name} <= {self.expr(1)};"
        elif roll < 0.62:
            op = self.rng.choice(["+", "^", "&", "|"])
            stmt = f"{name} <= ({name} {op} {self.leaf()});"
        elif roll < 0.80:
            stmt = (
                f"if ({self.cond_expr()}) {name} <= {self.expr(1)}; "
                f"else {name} <= {self.leaf()};"
            )
        elif roll < 0.90:
            stmt = f"if ({self.cond_expr()}) {name} <= {self.expr(1)};"
        else:
            sig, w_sel = self.pick_signal()
            arms = [f"    {self.const(w_sel)}: {name} <= {self.leaf()};" for _ in range(self.rng.randint(2, 3))]
            arms.append(f"    default: {name} <= {self.leaf()};")
            stmt = f"case ({sig})\n" + "\n".join(arms) + "\n  endcase"
        self.body.append(f"  always @(posedge clk) {stmt}")

    def add_comb_block(self) -> None:
        w = self.rng.choice(_WIDTHS)
        name = self.fresh("c")
        self.decls.append(f"  reg {self.range_decl(w)}{name};")
        self.body.append(
            f"  always @(*) begin\n"
            f"    if ({self.cond_expr()}) {name} = {self.expr(1)};\n"
            f"    else {name} = {self.leaf()};\n"
            f"  end"
        )
        self.pool.append((name, w))


def _build_module(rng: random.Random, n_stmts: int, name: str) -> str:
    b = _ModuleBuilder(rng, name)
    ports = ["input clk"]
    for i in range(rng.randint(2, 4)):
        w = rng.choice(_WIDTHS)
        ports.append(f"input {b.range_decl(w)}a{i}")
        b.pool.append((f"a{i}", w))

    for _ in range(n_stmts):
        roll = rng.random()
        if roll < 0.66:
            b.add_wire_assign()
        elif roll < 0.93:
            b.add_register()
        else:
            b.add_comb_block()

    n_out = rng.randint(1, 2)
    out_lines = []
    for j in range(n_out):
        sig, w = b.pick_signal()
        ports.append(f"output {b.range_decl(w)}y{j}")
        out_lines.append(f"  assign y{j} = {sig};")

    lines = [f"module {name} (", "  " + ",\n  ".join(ports), ");"]
    lines.extend(b.decls)
    lines.extend(b.body)
    lines.extend(out_lines)
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


# -- corpus generation ---------------------------------------------------------


def generate_corpus(
    out_dir: str | Path,
    count: int,
    seed: int = 0,
    mix: dict[str, float] | None = None,
    with_netlists: bool = True,
) -> Path:
    """Write designs, netlist stubs, the cell library, and a manifest."""
    mix = mix or {"tiny": 0.55, "small": 0.35, "medium": 0.10}
    out = Path(out_dir)
    (out / "designs").mkdir(parents=True, exist_ok=True)
    if with_netlists:
        (out / "netlists").mkdir(exist_ok=True)
    library = default_library()
    (out / "library.json").write_text(library_to_json(library))

    classes, weights = zip(*sorted(mix.items()))
    records = []
    for i in range(count):
        rng = random.Random(f"{seed}:{i}")
        size_class = rng.choices(classes, weights=weights)[0]
        design_id = f"d{i:05d}"
        text = generate_design(rng, size_class, name=design_id)
        vpath = out / "designs" / f"{design_id}.v"
        vpath.write_text(text)
        g = compile_verilog(text)
        area, delay = label_oracle(g, library)
        npath = None
        if with_netlists:
            stub = generate_netlist_stub(g, library)
            npath = out / "netlists" / f"{design_id}.json"
            npath.write_text(json.dumps(stub, sort_keys=True) + "\n")
        records.append(
            DesignRecord(
                design_id=design_id,
                verilog=str(vpath.relative_to(out)),
                netlist=str(npath.relative_to(out)) if npath else None,
                area=area,
                delay=delay,
            )
        )
    manifest = out / "manifest.csv"
    write_manifest(manifest, records)
    return manifest


# -- record -> training item bridges --------------------------------------------


def load_graph_samples(records: list[DesignRecord]) -> dict[str, GraphSample]:
    samples = {}
    for r in records:
        g = compile_verilog(Path(r.verilog).read_text())
        samples[r.design_id] = prepare_sample(g, design_id=r.design_id)
    return samples


def load_quality_items(
    records: list[DesignRecord],
    metric: str,
    samples: dict[str, GraphSample] | None = None,
    library: CellLibrary | None = None,
    with_netlists: bool = False,
) -> list[QualityItem]:
    if metric not in ("area", "delay"):
        raise ValueError(f"metric must be 'area' or 'delay', got {metric!r}")
    samples = samples or load_graph_samples(records)
    items = []
    for r in records:
        label = r.area if metric == "area" else r.delay
        item = QualityItem(sample=samples[r.design_id], log_target=log_transform(label))
        if with_netlists:
            if r.netlist is None:
                raise ValueError(f"record {r.design_id} has no netlist path")
            lib = library or default_library()
            netlist = parse_netlist(Path(r.netlist).read_text())
            src, dst = netlist_graph(netlist, lib)
            item.netlist_x = cell_features(netlist, lib)
            item.netlist_src = src
            item.netlist_dst = dst
        items.append(item)
    return items


def load_netlist_items(
    records: list[DesignRecord], metric: str, library: CellLibrary | None = None
) -> list[NetlistItem]:
    lib = library or default_library()
    items = []
    for r in records:
        if r.netlist is None:
            raise ValueError(f"record {r.design_id} has no netlist path")
        netlist = parse_netlist(Path(r.netlist).read_text())
        src, dst = netlist_graph(netlist, lib)
        label = r.area if metric == "area" else r.delay
        items.append(
            NetlistItem(
                x=cell_features(netlist, lib),
                src=src,
                dst=dst,
                log_target=log_transform(label),
                design_id=r.design_id,
            )
        )
    return items
