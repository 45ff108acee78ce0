"""Run configuration: one JSON-serializable structure covering the model
shape and every training stage, with a desk-scale preset for CI-sized runs.
Every CLI run writes the resolved config beside its outputs.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distill import DistillSettings
from .nn.model import EncoderModel
from .pm_netlist import TeacherSettings
from .pretrain import PretrainSettings
from .quality import RegressorSettings


@dataclass
class ModelSettings:
    hidden_dim: int = 128
    gin_layers: int = 8
    transformer_layers: int = 8
    attention_heads: int = 4
    ff_multiplier: int = 4
    dtype: str = "float64"


@dataclass
class RunConfig:
    seed: int = 0
    threads: int = 1
    split_ratio: float = 0.8
    desk_scale: bool = False
    model: ModelSettings = field(default_factory=ModelSettings)
    pretrain: PretrainSettings = field(default_factory=PretrainSettings)
    regressor: RegressorSettings = field(default_factory=RegressorSettings)
    teacher: TeacherSettings = field(default_factory=TeacherSettings)
    distill: DistillSettings = field(default_factory=DistillSettings)


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def _merge(obj, data: dict):
    for key, value in data.items():
        if not hasattr(obj, key):
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            _merge(current, value)
        else:
            setattr(obj, key, type(current)(value) if current is not None else value)
    return obj


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ValueError("config file must contain a JSON object")
        _merge(cfg, data)
    return cfg


def apply_desk_scale(cfg: RunConfig) -> RunConfig:
    """Shrink everything to CI scale: smaller model, far fewer epochs, and
    learning rates raised to converge within those epochs."""
    cfg.desk_scale = True
    cfg.model.hidden_dim = 64
    cfg.model.gin_layers = 3
    cfg.model.transformer_layers = 2
    cfg.pretrain.epochs = 30
    cfg.pretrain.lr = 1e-3
    cfg.pretrain.weight_decay = 1e-4
    cfg.teacher.gin_layers = 8
    cfg.teacher.hidden_dim = cfg.model.hidden_dim
    cfg.teacher.epochs = 60
    cfg.teacher.lr = 3e-3
    cfg.regressor.epochs = 60
    cfg.regressor.lr = 3e-3
    cfg.regressor.encoder_lr = 3e-4
    return cfg


def save_snapshot(cfg: RunConfig, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "config_snapshot.json"
    path.write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")
    return path


def build_encoder(cfg: RunConfig, seed: int | None = None) -> EncoderModel:
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    m = cfg.model
    return EncoderModel(
        rng,
        hidden_dim=m.hidden_dim,
        gin_layers=m.gin_layers,
        transformer_layers=m.transformer_layers,
        attention_heads=m.attention_heads,
        ff_multiplier=m.ff_multiplier,
    )


def encoder_meta(cfg: RunConfig) -> dict:
    m = cfg.model
    return {
        "attention_heads": m.attention_heads,
        "ff_multiplier": m.ff_multiplier,
        "gin_layers": m.gin_layers,
        "hidden_dim": m.hidden_dim,
        "kind": "encoder",
        "transformer_layers": m.transformer_layers,
    }


def encoder_from_meta(meta: dict, rng: np.random.Generator | None = None) -> EncoderModel:
    rng = rng if rng is not None else np.random.default_rng(0)
    return EncoderModel(
        rng,
        hidden_dim=int(meta["hidden_dim"]),
        gin_layers=int(meta["gin_layers"]),
        transformer_layers=int(meta["transformer_layers"]),
        attention_heads=int(meta["attention_heads"]),
        ff_multiplier=int(meta["ff_multiplier"]),
    )
