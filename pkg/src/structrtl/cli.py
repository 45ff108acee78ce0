"""Unified command-line entry point.

Exit codes: 0 success, 1 pipeline failure (parse/elaborate/train/eval errors,
reported to stderr with file:line:column where available), 2 usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import difflib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from .cdfg import SchemaError, format_histogram, from_json, node_type_histogram, to_dot, to_json, validate
from .config import (
    RunConfig,
    apply_desk_scale,
    build_encoder,
    encoder_from_meta,
    encoder_meta,
    load_config,
    save_snapshot,
)
from .distill import DistillSettings, train_student_with_kd
from .elaborate import ElaborationError, elaborate
from .lexer import LexError, tokenize
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.model import TeacherModel
from .pm_netlist import default_library, train_teacher
from .pretrain import pretrain
from .quality import (
    compute_metrics,
    evaluate_quality,
    inverse_log_transform,
    predict_quality,
    train_regressor,
    write_history_csv,
    write_predictions_csv,
)
from .spectral import ConvergenceError, pe_to_json, positional_embeddings
from .vparser import ParseError, UnsupportedConstruct, parse

log = logging.getLogger("structrtl")

COMMANDS = (
    "parse",
    "cdfg",
    "stats",
    "pe",
    "gen-synth",
    "pretrain",
    "train-teacher",
    "train",
    "distill",
    "eval",
    "predict",
)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _suggest_on_unknown(argv)
    parser = _build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )
    _limit_threads(args.threads)

    try:
        return args.handler(args)
    except (LexError, ParseError, UnsupportedConstruct, ElaborationError) as exc:
        src = getattr(args, "file", None) or getattr(args, "corpus", "")
        line = getattr(exc, "line", 0)
        column = getattr(exc, "column", 0)
        print(f"{src}:{line}:{column}: error: {exc}", file=sys.stderr)
        return 1
    except (SchemaError, ConvergenceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


_VALUE_FLAGS = {"--seed", "--config", "--threads", "--log-level"}


def _suggest_on_unknown(argv: list[str]) -> None:
    skip_next = False
    for token in argv:
        if skip_next:
            skip_next = False
            continue
        if token.startswith("-"):
            skip_next = token in _VALUE_FLAGS
            continue
        if token not in COMMANDS:
            close = difflib.get_close_matches(token, COMMANDS, n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            print(f"error: unknown command {token!r}{hint}", file=sys.stderr)
            raise SystemExit(2)
        return


def _limit_threads(threads: int) -> None:
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=threads)
    except ImportError:  # pragma: no cover - always available in CI image
        log.warning("threadpoolctl unavailable; --threads not enforced")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="structrtl", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--config", type=str, default=None, help="JSON config file")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--log-level", type=str, default="info")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a Verilog file and emit AST or CDFG")
    p.add_argument("file")
    p.add_argument("--emit", choices=("ast", "cdfg"), default="cdfg")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(handler=_cmd_parse)

    p = sub.add_parser("cdfg", help="compile a Verilog file to CDFG JSON / DOT")
    p.add_argument("file")
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--dot", type=str, default=None)
    p.set_defaults(handler=_cmd_cdfg)

    p = sub.add_parser("stats", help="node-type histogram over a corpus")
    p.add_argument("paths", nargs="+", help="manifest.csv or .v files")
    p.set_defaults(handler=_cmd_stats)

    p = sub.add_parser("pe", help="positional embeddings for a CDFG JSON file")
    p.add_argument("file")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(handler=_cmd_pe)

    p = sub.add_parser("gen-synth", help="generate a synthetic labeled corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--mix", type=str, default=None, help="e.g. tiny=0.5,small=0.35,medium=0.15")
    p.add_argument("--no-netlists", action="store_true")
    p.set_defaults(handler=_cmd_gen_synth)

    p = sub.add_parser("pretrain", help="self-supervised pretraining on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--desk-scale", action="store_true")
    p.set_defaults(handler=_cmd_pretrain)

    p = sub.add_parser("train-teacher", help="train the netlist-side quality predictor")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", choices=("area", "delay"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--desk-scale", action="store_true")
    p.set_defaults(handler=_cmd_train_teacher)

    p = sub.add_parser("train", help="train the quality regressor")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", choices=("area", "delay"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--encoder", type=str, default=None, help="pretrained encoder checkpoint")
    p.add_argument("--freeze-encoder", action="store_true")
    p.add_argument("--desk-scale", action="store_true")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("distill", help="train the student with teacher distillation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", choices=("area", "delay"), required=True)
    p.add_argument("--teacher", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--encoder", type=str, default=None)
    p.add_argument("--freeze-encoder", action="store_true")
    p.add_argument("--desk-scale", action="store_true")
    p.set_defaults(handler=_cmd_distill)

    p = sub.add_parser("eval", help="evaluate a trained model checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", choices=("area", "delay"), required=True)
    p.add_argument("--split", choices=("train", "val", "all"), default="val")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("predict", help="predict quality for one Verilog file")
    p.add_argument("file")
    p.add_argument("--ckpt", required=True)
    p.set_defaults(handler=_cmd_predict)

    return parser


def _resolved_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "desk_scale", False):
        apply_desk_scale(cfg)
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.threads = args.threads
    return cfg


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _compile_file(path: str):
    source = Path(path).read_text()
    modules = parse(tokenize(source))
    if len(modules) != 1:
        raise UnsupportedConstruct(f"expected exactly one module, found {len(modules)}")
    return modules[0]


def _cmd_parse(args) -> int:
    module = _compile_file(args.file)
    if args.emit == "ast":
        _write_text(args.out, json.dumps(_ast_to_obj(module), indent=2) + "\n")
        return 0
    g = elaborate(module)
    problems = validate(g)
    if problems:
        raise ElaborationError("; ".join(problems))
    _write_text(args.out, to_json(g))
    return 0


def _ast_to_obj(node):
    if dataclasses.is_dataclass(node):
        obj = {"kind": type(node).__name__}
        for f in dataclasses.fields(node):
            obj[f.name] = _ast_to_obj(getattr(node, f.name))
        return obj
    if isinstance(node, list):
        return [_ast_to_obj(x) for x in node]
    return node


def _cmd_cdfg(args) -> int:
    g = elaborate(_compile_file(args.file))
    problems = validate(g)
    if problems:
        raise ElaborationError("; ".join(problems))
    if args.dot:
        Path(args.dot).write_text(to_dot(g))
    if args.out or not args.dot:
        _write_text(args.out, to_json(g))
    return 0


def _cmd_stats(args) -> int:
    graphs = []
    for path in args.paths:
        if path.endswith(".csv"):
            for record in data_mod.load_manifest(path):
                graphs.append(elaborate(_compile_file(record.verilog)))
        else:
            graphs.append(elaborate(_compile_file(path)))
    counts, ratios = node_type_histogram(graphs)
    print(format_histogram(counts, ratios))
    return 0


def _cmd_pe(args) -> int:
    g = from_json(Path(args.file).read_text())
    _write_text(args.out, pe_to_json(positional_embeddings(g)))
    return 0


def _cmd_gen_synth(args) -> int:
    cfg = _resolved_config(args)
    mix = None
    if args.mix:
        mix = {}
        for part in args.mix.split(","):
            name, _, frac = part.partition("=")
            mix[name.strip()] = float(frac)
    manifest = data_mod.generate_corpus(
        args.out, args.count, seed=cfg.seed, mix=mix, with_netlists=not args.no_netlists
    )
    save_snapshot(cfg, args.out)
    log.info("wrote %s", manifest)
    return 0


def _load_split_items(args, cfg: RunConfig, with_netlists: bool = False):
    records = data_mod.load_manifest(args.corpus)
    data_mod.assign_splits(records, ratio=cfg.split_ratio, seed=cfg.seed)
    samples = data_mod.load_graph_samples(records)
    train_records = [r for r in records if r.split == "train"]
    val_records = [r for r in records if r.split == "val"]
    task = getattr(args, "task", "area")
    train_items = data_mod.load_quality_items(train_records, task, samples, with_netlists=with_netlists)
    val_items = data_mod.load_quality_items(val_records, task, samples)
    return records, samples, train_items, val_items


def _cmd_pretrain(args) -> int:
    cfg = _resolved_config(args)
    records = data_mod.load_manifest(args.corpus)
    data_mod.assign_splits(records, ratio=cfg.split_ratio, seed=cfg.seed)
    samples = data_mod.load_graph_samples(records)
    train_samples = [samples[r.design_id] for r in records if r.split == "train"]
    val_samples = [samples[r.design_id] for r in records if r.split == "val"]
    model = build_encoder(cfg)
    cfg.pretrain.seed = cfg.seed
    history = pretrain(model, train_samples, val_samples, cfg.pretrain, out_dir=args.out)
    save_checkpoint(Path(args.out) / "encoder.json", model.state_dict(), encoder_meta(cfg))
    save_snapshot(cfg, args.out)
    last = history[-1]
    log.info("final: acc_mnm=%.4f acc_ep=%.4f", last.acc_mnm, last.acc_ep)
    return 0


def _cmd_train_teacher(args) -> int:
    cfg = _resolved_config(args)
    records = data_mod.load_manifest(args.corpus)
    data_mod.assign_splits(records, ratio=cfg.split_ratio, seed=cfg.seed)
    library = default_library()
    train_items = data_mod.load_netlist_items([r for r in records if r.split == "train"], args.task, library)
    val_items = data_mod.load_netlist_items([r for r in records if r.split == "val"], args.task, library)
    cfg.teacher.seed = cfg.seed
    teacher, report, history = train_teacher(train_items, val_items, cfg.teacher)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "gin_layers": cfg.teacher.gin_layers,
        "hidden_dim": cfg.teacher.hidden_dim,
        "in_dim": int(train_items[0].x.shape[1]),
        "kind": "teacher",
        "task": args.task,
    }
    save_checkpoint(out / "teacher.json", teacher.state_dict(), meta)
    (out / "metrics.json").write_text(report.to_json())
    write_history_csv(out / "history.csv", history)
    save_snapshot(cfg, out)
    log.info("teacher %s: %s", args.task, report.as_dict())
    return 0


def _load_teacher(path: str) -> TeacherModel:
    state, meta = load_checkpoint(path)
    teacher = TeacherModel(
        int(meta["in_dim"]),
        np.random.default_rng(0),
        hidden_dim=int(meta["hidden_dim"]),
        gin_layers=int(meta["gin_layers"]),
    )
    teacher.load_state_dict(state)
    return teacher


def _prepare_student(args, cfg: RunConfig):
    model = build_encoder(cfg)
    if args.encoder:
        state, _ = load_checkpoint(args.encoder)
        model.load_state_dict(state)
    if args.freeze_encoder:
        cfg.regressor.finetune_encoder = False
    return model


def _finish_training(args, cfg, model, report, history, val_items) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "model.json", model.state_dict(), encoder_meta(cfg) | {"task": args.task})
    (out / "metrics.json").write_text(report.to_json())
    write_history_csv(out / "history.csv", history)
    if val_items:
        preds, _ = evaluate_quality(model, val_items)
        write_predictions_csv(out / "predictions.csv", val_items, preds)
    save_snapshot(cfg, out)
    log.info("%s: %s", args.task, report.as_dict())
    return 0


def _cmd_train(args) -> int:
    cfg = _resolved_config(args)
    _, _, train_items, val_items = _load_split_items(args, cfg)
    model = _prepare_student(args, cfg)
    cfg.regressor.seed = cfg.seed
    report, history = train_regressor(model, train_items, val_items, cfg.regressor)
    return _finish_training(args, cfg, model, report, history, val_items)


def _cmd_distill(args) -> int:
    cfg = _resolved_config(args)
    _, _, train_items, val_items = _load_split_items(args, cfg, with_netlists=True)
    model = _prepare_student(args, cfg)
    teacher = _load_teacher(args.teacher)
    cfg.regressor.seed = cfg.seed
    report, history = train_student_with_kd(
        teacher, model, train_items, val_items, cfg.regressor,
        DistillSettings(tau=cfg.distill.tau, mu=cfg.distill.mu),
    )
    return _finish_training(args, cfg, model, report, history, val_items)


def _cmd_eval(args) -> int:
    cfg = _resolved_config(args)
    state, meta = load_checkpoint(args.ckpt)
    model = encoder_from_meta(meta)
    model.load_state_dict(state)
    records = data_mod.load_manifest(args.corpus)
    data_mod.assign_splits(records, ratio=cfg.split_ratio, seed=cfg.seed)
    if args.split != "all":
        records = [r for r in records if r.split == args.split]
    items = data_mod.load_quality_items(records, args.task)
    preds, targets = evaluate_quality(model, items)
    report = compute_metrics(preds, targets)
    sys.stdout.write(report.to_json())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(report.to_json())
        write_predictions_csv(out / "predictions.csv", items, preds)
        save_snapshot(cfg, out)
    return 0


def _cmd_predict(args) -> int:
    state, meta = load_checkpoint(args.ckpt)
    model = encoder_from_meta(meta)
    model.load_state_dict(state)
    g = elaborate(_compile_file(args.file))
    from .pretrain import prepare_sample

    value = predict_quality(model, prepare_sample(g))
    task = meta.get("task", "quality")
    print(f"{task} (log-space): {value:.6f}")
    print(f"{task} (raw): {inverse_log_transform(value):.6f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
