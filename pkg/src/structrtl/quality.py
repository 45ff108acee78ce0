"""Quality regression: log-space targets, log-cosh loss, the four evaluation
metrics, and the training loop shared by the plain regressor and the
distillation path (which injects its extra loss term via a callback).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .nn.layers import mean_max_pool
from .nn.model import EncoderModel
from .nn.optim import Adam
from .nn.tensor import Tensor, concat, log_cosh, no_grad, reshape
from .pretrain import GraphSample


class DomainError(ValueError):
    pass


class UndefinedMetric(ValueError):
    pass


def log_transform(y: float) -> float:
    """Natural log of a positive quality value."""
    if y <= 0:
        raise DomainError(f"log transform requires y > 0, got {y}")
    return math.log(y)


def inverse_log_transform(v: float) -> float:
    return math.exp(v)


def log_cosh_loss(pred, target):
    """Mean log(cosh(pred - target)); accepts Tensors or arrays."""
    if isinstance(pred, Tensor) or isinstance(target, Tensor):
        pred_t = pred if isinstance(pred, Tensor) else Tensor(pred)
        target_t = target if isinstance(target, Tensor) else Tensor(target)
        return log_cosh(pred_t - target_t).mean()
    d = np.abs(np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64))
    return float(np.mean(d + np.log1p(np.exp(-2.0 * d)) - np.log(2.0)))


@dataclass
class MetricReport:
    mae: float
    mape: float
    r2: float
    rrse: float
    n_samples: int

    def as_dict(self) -> dict:
        return {
            "mae": self.mae,
            "mape": self.mape,
            "n_samples": self.n_samples,
            "r2": self.r2,
            "rrse": self.rrse,
        }

    def to_json(self) -> str:
        import json

        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


def compute_metrics(preds, targets) -> MetricReport:
    """MAE, MAPE, R^2, RRSE. R^2 and RRSE share SSE/SST, so RRSE^2 + R^2 = 1."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape or preds.ndim != 1:
        raise ValueError("preds and targets must be 1-D arrays of equal length")
    n = preds.size
    if n < 2:
        raise UndefinedMetric("metrics require at least 2 samples")
    sst = float(((targets - targets.mean()) ** 2).sum())
    if sst == 0.0:
        raise UndefinedMetric("R^2/RRSE undefined: all targets identical (SST = 0)")
    if np.any(targets == 0.0):
        raise UndefinedMetric("MAPE undefined: a target equals 0")
    err = preds - targets
    sse = float((err**2).sum())
    return MetricReport(
        mae=float(np.abs(err).mean()),
        mape=float(np.abs(err / targets).mean()),
        r2=1.0 - sse / sst,
        rrse=math.sqrt(sse / sst),
        n_samples=n,
    )


def predict_quality(model: EncoderModel, sample: GraphSample) -> float:
    """Log-space prediction for one graph (no augmentation, no gradients)."""
    with no_grad():
        h_t = model.encode(sample.features, sample.src, sample.dst, sample.pe.vectors)
        pred, _ = model.quality_from_embeddings(h_t)
    return pred.item()


@dataclass
class QualityItem:
    sample: GraphSample
    log_target: float
    # Netlist-side tensors, present only when a teacher participates.
    netlist_x: np.ndarray | None = None
    netlist_src: np.ndarray | None = None
    netlist_dst: np.ndarray | None = None


@dataclass
class RegressorSettings:
    epochs: int = 600
    batch_size: int = 256
    lr: float = 1e-4
    weight_decay: float = 1e-5
    finetune_encoder: bool = True
    encoder_lr: float = 2e-5
    encoder_weight_decay: float = 1e-4
    seed: int = 0
    log_every: int = 20


@dataclass
class TrainRow:
    epoch: int
    train_loss: float
    val_mae: float = float("nan")


# Composes the per-item loss; distillation swaps in its own version.
LossFn = Callable[[QualityItem, Tensor, Tensor], Tensor]


def _default_loss(item: QualityItem, pred: Tensor, penult: Tensor) -> Tensor:
    return log_cosh(pred - item.log_target)


def evaluate_quality(model: EncoderModel, items: list[QualityItem]) -> tuple[np.ndarray, np.ndarray]:
    preds = np.array([predict_quality(model, item.sample) for item in items])
    targets = np.array([item.log_target for item in items])
    return preds, targets


def train_quality_model(
    model: EncoderModel,
    train_items: list[QualityItem],
    val_items: list[QualityItem],
    settings: RegressorSettings | None = None,
    loss_fn: LossFn | None = None,
) -> tuple[MetricReport, list[TrainRow]]:
    """Train the regression head (optionally fine-tuning the encoder) on
    log-space targets; returns the validation report and the loss history.

    With a frozen encoder the node embeddings are computed once and cached, so
    only the 3-layer head trains.
    """
    settings = settings or RegressorSettings()
    loss_fn = loss_fn or _default_loss
    if not train_items:
        raise ValueError("empty training set")

    head_names = {name for name, _ in model.named_parameters() if name.startswith("quality_head.")}
    head_params = [t for name, t in model.named_parameters() if name in head_names]
    encoder_params = [t for name, t in model.named_parameters() if name not in head_names]
    groups = [{"params": head_params, "lr": settings.lr, "weight_decay": settings.weight_decay}]
    if settings.finetune_encoder:
        groups.append(
            {
                "params": encoder_params,
                "lr": settings.encoder_lr,
                "weight_decay": settings.encoder_weight_decay,
            }
        )
    optimizer = Adam(groups)
    rng = np.random.default_rng(settings.seed)

    pooled_cache: list[Tensor] | None = None
    if not settings.finetune_encoder:
        pooled_cache = []
        with no_grad():
            for item in train_items:
                s = item.sample
                h_t = model.encode(s.features, s.src, s.dst, s.pe.vectors)
                pooled_cache.append(reshape(mean_max_pool(h_t), (1, 2 * model.hidden_dim)))

    def forward(idx: int, item: QualityItem) -> tuple[Tensor, Tensor]:
        if pooled_cache is not None:
            pred, penult = model.quality_head.forward_with_penultimate(pooled_cache[idx])
            return reshape(pred, ()), reshape(penult, (model.hidden_dim,))
        s = item.sample
        h_t = model.encode(s.features, s.src, s.dst, s.pe.vectors)
        return model.quality_from_embeddings(h_t)

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
                pred, penult = forward(int(i), item)
                losses.append(loss_fn(item, pred, penult))
            batch_loss = concat([reshape(l, (1,)) for l in losses], axis=0).mean()
            batch_loss.backward()
            optimizer.step()
            epoch_loss += batch_loss.item()
            batches += 1
        row = TrainRow(epoch, epoch_loss / batches)
        if val_items and (epoch % settings.log_every == 0 or epoch == settings.epochs - 1):
            preds, targets = evaluate_quality(model, val_items)
            row.val_mae = float(np.abs(preds - targets).mean())
        history.append(row)

    eval_items = val_items if val_items else train_items
    preds, targets = evaluate_quality(model, eval_items)
    report = compute_metrics(preds, targets)
    return report, history


def train_regressor(
    model: EncoderModel,
    train_items: list[QualityItem],
    val_items: list[QualityItem],
    settings: RegressorSettings | None = None,
) -> tuple[MetricReport, list[TrainRow]]:
    """Plain quality regression with the log-cosh objective."""
    return train_quality_model(model, train_items, val_items, settings, loss_fn=None)


def write_predictions_csv(path: str | Path, items: list[QualityItem], preds: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["design_id", "target", "prediction"])
        for item, pred in zip(items, preds):
            writer.writerow([item.sample.design_id, f"{item.log_target:.8f}", f"{pred:.8f}"])


def write_history_csv(path: str | Path, history: list[TrainRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_mae"])
        for row in history:
            writer.writerow([row.epoch, f"{row.train_loss:.8f}", f"{row.val_mae:.8f}"])
