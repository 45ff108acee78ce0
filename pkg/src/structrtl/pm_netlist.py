"""Post-mapping netlist ingestion, cell featurization, and teacher training.

The netlist JSON schema is {"cells":[{"id":int,"type":str,"pins":{pin:net}}],
"inputs":[net...],"outputs":[net...]}. Cell graph edges run driver-cell ->
sink-cell per shared net; every net must have exactly one driver (a cell
output pin or a primary input).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cdfg import SchemaError
from .nn.model import TeacherModel
from .nn.optim import Adam
from .nn.tensor import concat, log_cosh, no_grad, reshape


class MultipleDrivers(ValueError):
    def __init__(self, net: str):
        self.net = net
        super().__init__(f"net {net!r} has multiple drivers")


class NetlistError(ValueError):
    pass


@dataclass
class CellDef:
    name: str
    input_pins: list[str]
    output_pin: str | None
    truth_table: list[int]
    area: float
    pin_delays: list[float]
    sequential: bool = False

    @property
    def num_inputs(self) -> int:
        return len(self.input_pins)


@dataclass
class CellLibrary:
    cells: dict[str, CellDef]

    @property
    def names(self) -> list[str]:
        return sorted(self.cells)

    @property
    def max_inputs(self) -> int:
        return max(c.num_inputs for c in self.cells.values())

    @property
    def max_tt_len(self) -> int:
        return max(
            (2**c.num_inputs for c in self.cells.values() if not c.sequential),
            default=2,
        )

    @property
    def feature_dim(self) -> int:
        return len(self.cells) + self.max_tt_len + 1 + self.max_inputs

    def validate(self) -> None:
        for cell in self.cells.values():
            if cell.area <= 0:
                raise SchemaError(f"/cells/{cell.name}/area", "area must be positive")
            if not cell.sequential and len(cell.truth_table) != 2**cell.num_inputs:
                raise SchemaError(
                    f"/cells/{cell.name}/truth_table",
                    f"expected {2 ** cell.num_inputs} entries, got {len(cell.truth_table)}",
                )
            if len(cell.pin_delays) != cell.num_inputs:
                raise SchemaError(
                    f"/cells/{cell.name}/pin_delays",
                    f"expected {cell.num_inputs} entries, got {len(cell.pin_delays)}",
                )


def default_library() -> CellLibrary:
    """Generic 8-cell library; real libraries load through the same schema."""
    defs = [
        CellDef("INV", ["A"], "Y", [1, 0], 1.0, [1.0]),
        CellDef("BUF", ["A"], "Y", [0, 1], 1.0, [0.8]),
        CellDef("NAND2", ["A", "B"], "Y", [1, 1, 1, 0], 1.5, [1.2, 1.2]),
        CellDef("NOR2", ["A", "B"], "Y", [1, 0, 0, 0], 1.5, [1.4, 1.4]),
        CellDef("AND2", ["A", "B"], "Y", [0, 0, 0, 1], 2.0, [1.5, 1.5]),
        CellDef("OR2", ["A", "B"], "Y", [0, 1, 1, 1], 2.0, [1.6, 1.6]),
        CellDef("XOR2", ["A", "B"], "Y", [0, 1, 1, 0], 3.0, [2.0, 2.0]),
        CellDef("DFF", ["D", "C"], "Q", [0, 1], 4.0, [0.5, 0.3], sequential=True),
    ]
    lib = CellLibrary({c.name: c for c in defs})
    lib.validate()
    return lib


def library_to_json(lib: CellLibrary) -> str:
    obj = {
        "cells": [
            {
                "area": c.area,
                "input_pins": c.input_pins,
                "name": c.name,
                "output_pin": c.output_pin,
                "pin_delays": c.pin_delays,
                "sequential": c.sequential,
                "truth_table": c.truth_table,
            }
            for _, c in sorted(lib.cells.items())
        ]
    }
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def library_from_json(data: str | bytes) -> CellLibrary:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError("/", f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("cells"), list):
        raise SchemaError("/cells", "expected a list of cell definitions")
    cells = {}
    for i, c in enumerate(obj["cells"]):
        path = f"/cells/{i}"
        if not isinstance(c, dict) or "name" not in c:
            raise SchemaError(path, "expected an object with a 'name'")
        cells[c["name"]] = CellDef(
            name=c["name"],
            input_pins=list(c.get("input_pins", [])),
            output_pin=c.get("output_pin"),
            truth_table=[int(b) for b in c.get("truth_table", [])],
            area=float(c.get("area", 0.0)),
            pin_delays=[float(d) for d in c.get("pin_delays", [])],
            sequential=bool(c.get("sequential", False)),
        )
    lib = CellLibrary(cells)
    lib.validate()
    return lib


@dataclass
class NetCell:
    id: int
    type: str
    pins: dict[str, str]  # pin name -> net name


@dataclass
class Netlist:
    cells: list[NetCell] = field(default_factory=list)
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)

    @property
    def num_cells(self) -> int:
        return len(self.cells)


def parse_netlist(data: str | bytes | dict) -> Netlist:
    if isinstance(data, (str, bytes)):
        try:
            obj = json.loads(data)
        except json.JSONDecodeError as exc:
            raise SchemaError("/", f"invalid JSON: {exc}") from exc
    else:
        obj = data
    if not isinstance(obj, dict):
        raise SchemaError("/", "expected a JSON object")
    cells_obj = obj.get("cells")
    if not isinstance(cells_obj, list):
        raise SchemaError("/cells", "expected a list")
    netlist = Netlist(
        inputs=[str(x) for x in obj.get("inputs", [])],
        outputs=[str(x) for x in obj.get("outputs", [])],
    )
    for i, c in enumerate(cells_obj):
        path = f"/cells/{i}"
        if not isinstance(c, dict):
            raise SchemaError(path, "expected an object")
        cid = c.get("id")
        if not isinstance(cid, int) or cid != i:
            raise SchemaError(f"{path}/id", f"ids must be dense and ordered; expected {i}, got {cid!r}")
        ctype = c.get("type")
        if not isinstance(ctype, str):
            raise SchemaError(f"{path}/type", "expected a string")
        pins = c.get("pins")
        if not isinstance(pins, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in pins.items()
        ):
            raise SchemaError(f"{path}/pins", "expected an object of pin -> net strings")
        netlist.cells.append(NetCell(cid, ctype, dict(pins)))
    return netlist


def netlist_graph(netlist: Netlist, library: CellLibrary) -> tuple[np.ndarray, np.ndarray]:
    """Driver-cell -> sink-cell edge arrays, validating single-driver nets."""
    driver: dict[str, int | str] = {net: "input" for net in netlist.inputs}
    for cell in netlist.cells:
        cdef = library.cells.get(cell.type)
        if cdef is None:
            raise NetlistError(f"cell {cell.id} has unknown type {cell.type!r}")
        if cdef.output_pin is not None and cdef.output_pin in cell.pins:
            net = cell.pins[cdef.output_pin]
            if net in driver:
                raise MultipleDrivers(net)
            driver[net] = cell.id

    src, dst = [], []
    for cell in netlist.cells:
        cdef = library.cells[cell.type]
        for pin in cdef.input_pins:
            net = cell.pins.get(pin)
            if net is None:
                raise NetlistError(f"cell {cell.id} missing pin {pin!r}")
            if net not in driver:
                raise NetlistError(f"net {net!r} has no driver")
            d = driver[net]
            if d != "input":
                src.append(int(d))
                dst.append(cell.id)
    for net in netlist.outputs:
        if net not in driver:
            raise NetlistError(f"output net {net!r} has no driver")
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)


def cell_features(netlist: Netlist, library: CellLibrary) -> np.ndarray:
    """Per-cell rows: one-hot type + zero-padded truth table + area + padded
    pin delays. Width is fixed by the library, not the netlist."""
    names = library.names
    name_idx = {n: i for i, n in enumerate(names)}
    tt_len = library.max_tt_len
    fan_in = library.max_inputs
    feats = np.zeros((netlist.num_cells, library.feature_dim), dtype=np.float64)
    for cell in netlist.cells:
        cdef = library.cells.get(cell.type)
        if cdef is None:
            raise NetlistError(f"cell {cell.id} has unknown type {cell.type!r}")
        row = feats[cell.id]
        row[name_idx[cell.type]] = 1.0
        tt = cdef.truth_table[:tt_len]
        row[len(names) : len(names) + len(tt)] = tt
        row[len(names) + tt_len] = cdef.area
        delays = cdef.pin_delays[:fan_in]
        row[len(names) + tt_len + 1 : len(names) + tt_len + 1 + len(delays)] = delays
    return feats


@dataclass
class NetlistItem:
    x: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    log_target: float
    design_id: str = ""


@dataclass
class TeacherSettings:
    gin_layers: int = 20
    hidden_dim: int = 128
    epochs: int = 1000
    batch_size: int = 256
    lr: float = 1e-4
    weight_decay: float = 1e-5
    seed: int = 0
    log_every: int = 20


def predict_teacher(teacher: TeacherModel, item: NetlistItem) -> float:
    with no_grad():
        pred, _ = teacher.predict(item.x, item.src, item.dst)
    return pred.item()


def evaluate_teacher(teacher: TeacherModel, items: list[NetlistItem]) -> tuple[np.ndarray, np.ndarray]:
    preds = np.array([predict_teacher(teacher, item) for item in items])
    targets = np.array([item.log_target for item in items])
    return preds, targets


def train_teacher(
    train_items: list[NetlistItem],
    val_items: list[NetlistItem],
    settings: TeacherSettings | None = None,
    teacher: TeacherModel | None = None,
):
    """Train the residual-GIN teacher on log targets with the log-cosh loss.

    Returns (teacher, MetricReport on the validation split, history rows).
    """
    from .quality import TrainRow, compute_metrics

    settings = settings or TeacherSettings()
    if not train_items:
        raise ValueError("empty training set")
    rng = np.random.default_rng(settings.seed)
    if teacher is None:
        in_dim = train_items[0].x.shape[1]
        teacher = TeacherModel(in_dim, rng, settings.hidden_dim, settings.gin_layers)
    optimizer = Adam.for_params(teacher.parameters(), settings.lr, settings.weight_decay)

    history: list[TrainRow] = []
    for epoch in range(settings.epochs):
        order = rng.permutation(len(train_items))
        epoch_loss = 0.0
        batches = 0
        for start in range(0, len(order), settings.batch_size):
            idxs = order[start : start + settings.batch_size]
            optimizer.zero_grad()
            losses = []
            for i in idxs:
                item = train_items[int(i)]
                pred, _ = teacher.predict(item.x, item.src, item.dst)
                losses.append(log_cosh(pred - item.log_target))
            batch_loss = concat([reshape(l, (1,)) for l in losses], axis=0).mean()
            batch_loss.backward()
            optimizer.step()
            epoch_loss += batch_loss.item()
            batches += 1
        row = TrainRow(epoch, epoch_loss / batches)
        if val_items and (epoch % settings.log_every == 0 or epoch == settings.epochs - 1):
            preds, targets = evaluate_teacher(teacher, val_items)
            row.val_mae = float(np.abs(preds - targets).mean())
        history.append(row)

    eval_items = val_items if val_items else train_items
    preds, targets = evaluate_teacher(teacher, eval_items)
    report = compute_metrics(preds, targets)
    return teacher, report, history
