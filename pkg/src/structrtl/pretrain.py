"""Self-supervised pretraining: masked node-type modeling (stratified masking
plus class-balanced focal loss) and edge prediction, combined as a weighted
sum. Masking happens at the post-GIN embedding level; the raw inputs and the
graph itself are never altered.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cdfg import NUM_NODE_TYPES, Cdfg, init_node_features
from .nn.checkpoint import save_checkpoint
from .nn.model import EncoderModel
from .nn.optim import AdamW
from .nn.tensor import (
    Tensor,
    bce_with_logits,
    concat,
    cross_entropy_per_sample,
    exp,
    gather_rows,
    masked_row_replace,
    no_grad,
    reshape,
)
from .spectral import PositionalEmbeddings, positional_embeddings, sign_flip_augment


class DegenerateBatch(RuntimeError):
    """Raised when a mask draw selects zero positions; retry with a new draw."""


@dataclass
class MaskConfig:
    mask_ratio: float = 0.2
    min_per_class: int = 1


@dataclass
class GraphSample:
    """A graph prepared for the model: features, edge arrays, PEs, labels."""

    graph: Cdfg
    features: np.ndarray  # (N, 33)
    src: np.ndarray
    dst: np.ndarray
    pe: PositionalEmbeddings
    types: np.ndarray  # (N,) node-type codes
    design_id: str = ""


def prepare_sample(g: Cdfg, design_id: str = "", pe: PositionalEmbeddings | None = None) -> GraphSample:
    edge_index = g.edge_index()
    return GraphSample(
        graph=g,
        features=init_node_features(g),
        src=edge_index[0],
        dst=edge_index[1],
        pe=pe if pe is not None else positional_embeddings(g),
        types=g.node_type_codes(),
        design_id=design_id,
    )


def stratified_mask(
    labels: np.ndarray, ratio: float, min_per_class: int, rng: np.random.Generator
) -> np.ndarray:
    """Bernoulli(ratio) base mask, then force-mask up to min_per_class members
    of every class that came up short (min(m, class size) when the class is
    smaller than m)."""
    labels = np.asarray(labels)
    mask = rng.random(labels.size) < ratio
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if int(mask[members].sum()) < min_per_class:
            forced = rng.choice(members, size=min(min_per_class, members.size), replace=False)
            mask[forced] = True
    return mask


def class_balance_weights(samples_per_class: np.ndarray, beta: float = 0.9999) -> np.ndarray:
    """Inverse effective-number weights, normalized to sum to len(S)."""
    s = np.asarray(samples_per_class, dtype=np.float64)
    effective_num = 1.0 - np.power(beta, s)
    w = (1.0 - beta) / (effective_num + 1e-8)
    return w / w.sum() * len(s)


def cb_focal_loss(
    samples_per_class: np.ndarray,
    logits: Tensor,
    labels: np.ndarray,
    beta: float = 0.9999,
    gamma: float = 2.0,
) -> Tensor:
    """Class-balanced focal loss: w_c * (1 - p_t)^gamma * ce, mean-reduced."""
    labels = np.asarray(labels, dtype=np.int64)
    weights = class_balance_weights(samples_per_class, beta)
    ce = cross_entropy_per_sample(logits, labels)
    p_t = exp(-ce)
    focal = (1.0 - p_t) ** gamma
    per_sample = Tensor(weights[labels]) * focal * ce
    return per_sample.mean()


def count_types(samples: list[GraphSample]) -> np.ndarray:
    counts = np.zeros(NUM_NODE_TYPES, dtype=np.int64)
    for s in samples:
        counts += np.bincount(s.types, minlength=NUM_NODE_TYPES)
    return counts


def sample_edges(
    g: Cdfg, ratio: float = 0.2, rng: np.random.Generator | None = None
) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Positive pairs: ceil(ratio * |E|) distinct edges, uniform without
    replacement. Negatives: an equal number of absent ordered pairs (u != v),
    or as many as exist on very dense graphs."""
    if rng is None:
        rng = np.random.default_rng()
    pairs = sorted({(e.src, e.dst) for e in g.edges})
    if not pairs:
        raise ValueError("edge sampling requires at least one edge")
    n = g.num_nodes
    n_pos = math.ceil(ratio * len(pairs))
    pos_idx = rng.choice(len(pairs), size=n_pos, replace=False)
    positives = [pairs[i] for i in pos_idx]

    edge_set = set(pairs)
    total_absent = n * (n - 1) - sum(1 for u, v in edge_set if u != v)
    negatives: list[tuple[int, int]] = []
    if n <= 60 or total_absent <= 4 * n_pos:
        absent = [(u, v) for u in range(n) for v in range(n) if u != v and (u, v) not in edge_set]
        if absent:
            take = min(n_pos, len(absent))
            neg_idx = rng.choice(len(absent), size=take, replace=False)
            negatives = [absent[i] for i in neg_idx]
    else:
        chosen: set[tuple[int, int]] = set()
        attempts = 0
        while len(chosen) < n_pos and attempts < 200 * n_pos:
            u = int(rng.integers(n))
            v = int(rng.integers(n))
            attempts += 1
            if u == v or (u, v) in edge_set or (u, v) in chosen:
                continue
            chosen.add((u, v))
        negatives = sorted(chosen)
    return positives, negatives


def pretrain_loss(l_mnm, l_ep, alpha: float = 0.5):
    return alpha * l_mnm + (1.0 - alpha) * l_ep


def masked_node_modeling_step(
    model: EncoderModel,
    sample: GraphSample,
    class_counts: np.ndarray,
    cfg: MaskConfig,
    rng: np.random.Generator,
    train: bool = True,
    h_g: Tensor | None = None,
) -> tuple[Tensor, float]:
    """One masked-node-modeling pass over a single graph.

    GIN runs on the unmasked features; masked positions get the [MASK]
    embedding after message passing; the classifier predicts node types only
    at masked positions, scored by the class-balanced focal loss.
    """
    if h_g is None:
        h_g = model.run_gin(Tensor(sample.features), sample.src, sample.dst)
    mask = stratified_mask(sample.types, cfg.mask_ratio, cfg.min_per_class, rng)
    if not mask.any():
        raise DegenerateBatch("mask draw selected zero positions")
    h_masked = masked_row_replace(h_g, mask, model.mask_embed)
    pe = sign_flip_augment(sample.pe, rng).vectors if train else sample.pe.vectors
    h_t = model.run_transformer(h_masked, pe)
    logits = model.type_head(gather_rows(h_t, np.flatnonzero(mask)))
    labels = sample.types[mask]
    loss = cb_focal_loss(class_counts, logits, labels)
    accuracy = float((logits.data.argmax(axis=1) == labels).mean())
    return loss, accuracy


def edge_prediction_step(
    model: EncoderModel,
    sample: GraphSample,
    rng: np.random.Generator,
    ratio: float = 0.2,
    train: bool = True,
    h_g: Tensor | None = None,
    pairs: tuple[list, list] | None = None,
) -> tuple[Tensor, float]:
    """Edge prediction from unmasked embeddings: concat source/target node
    embeddings, 3-layer MLP, binary cross-entropy; accuracy at threshold 0.5."""
    if h_g is None:
        h_g = model.run_gin(Tensor(sample.features), sample.src, sample.dst)
    pe = sign_flip_augment(sample.pe, rng).vectors if train else sample.pe.vectors
    h_t = model.run_transformer(h_g, pe)
    positives, negatives = pairs if pairs is not None else sample_edges(sample.graph, ratio, rng)
    all_pairs = positives + negatives
    labels = np.array([1.0] * len(positives) + [0.0] * len(negatives))
    src_ids = np.array([u for u, _ in all_pairs], dtype=np.int64)
    dst_ids = np.array([v for _, v in all_pairs], dtype=np.int64)
    feats = concat([gather_rows(h_t, src_ids), gather_rows(h_t, dst_ids)], axis=1)
    logits = reshape(model.edge_head(feats), (len(all_pairs),))
    loss = bce_with_logits(logits, labels).mean()
    accuracy = float(((logits.data > 0.0) == (labels > 0.5)).mean())
    return loss, accuracy


def full_edge_accuracy(model: EncoderModel, sample: GraphSample) -> float:
    """Accuracy over the complete edge set plus an equal all-absent sample
    (deterministic; used by overfit checks)."""
    rng = np.random.default_rng(0)
    pairs = sample_edges(sample.graph, ratio=1.0, rng=rng)
    with no_grad():
        _, acc = edge_prediction_step(model, sample, rng, train=False, pairs=pairs)
    return acc


@dataclass
class PretrainSettings:
    epochs: int = 2000
    batch_size: int = 16
    lr: float = 2e-5
    weight_decay: float = 1e-4
    alpha: float = 0.5
    mask_ratio: float = 0.2
    min_per_class: int = 1
    edge_ratio: float = 0.2
    seed: int = 0
    log_every: int = 1
    checkpoint_every: int = 0  # 0 = final checkpoint only


@dataclass
class EpochStats:
    epoch: int
    loss_mnm: float
    loss_ep: float
    acc_mnm: float
    acc_ep: float
    val_acc_mnm: float = float("nan")
    val_acc_ep: float = float("nan")


def evaluate_pretrain(
    model: EncoderModel,
    samples: list[GraphSample],
    class_counts: np.ndarray,
    cfg: MaskConfig,
    edge_ratio: float,
    seed: int,
) -> tuple[float, float]:
    """Task accuracies with a fixed evaluation rng and no augmentation."""
    rng = np.random.default_rng(seed)
    accs_mnm, accs_ep = [], []
    with no_grad():
        for sample in samples:
            h_g = model.run_gin(Tensor(sample.features), sample.src, sample.dst)
            _, a_m = masked_node_modeling_step(model, sample, class_counts, cfg, rng, train=False, h_g=h_g)
            _, a_e = edge_prediction_step(model, sample, rng, edge_ratio, train=False, h_g=h_g)
            accs_mnm.append(a_m)
            accs_ep.append(a_e)
    return float(np.mean(accs_mnm)), float(np.mean(accs_ep))


def pretrain(
    model: EncoderModel,
    train_samples: list[GraphSample],
    val_samples: list[GraphSample] | None = None,
    settings: PretrainSettings | None = None,
    out_dir: str | Path | None = None,
) -> list[EpochStats]:
    """Run the combined pretraining objective; returns per-epoch statistics.

    Deterministic under a fixed seed: batch order, masks, edge samples, and
    sign flips all derive from one generator.
    """
    settings = settings or PretrainSettings()
    if not train_samples:
        raise ValueError("empty training corpus")
    mask_cfg = MaskConfig(settings.mask_ratio, settings.min_per_class)
    class_counts = count_types(train_samples)
    optimizer = AdamW.for_params(model.parameters(), settings.lr, settings.weight_decay)
    rng = np.random.default_rng(settings.seed)
    history: list[EpochStats] = []

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    for epoch in range(settings.epochs):
        order = rng.permutation(len(train_samples))
        sums = np.zeros(4)
        batches = 0
        for start in range(0, len(order), settings.batch_size):
            batch = [train_samples[i] for i in order[start : start + settings.batch_size]]
            optimizer.zero_grad()
            losses = []
            stats = np.zeros(4)
            for sample in batch:
                h_g = model.run_gin(Tensor(sample.features), sample.src, sample.dst)
                for _ in range(10):
                    try:
                        l_mnm, a_mnm = masked_node_modeling_step(
                            model, sample, class_counts, mask_cfg, rng, train=True, h_g=h_g
                        )
                        break
                    except DegenerateBatch:
                        continue
                else:
                    raise DegenerateBatch("mask draw failed 10 times in a row")
                l_ep, a_ep = edge_prediction_step(
                    model, sample, rng, settings.edge_ratio, train=True, h_g=h_g
                )
                losses.append(pretrain_loss(l_mnm, l_ep, settings.alpha))
                stats += [l_mnm.item(), l_ep.item(), a_mnm, a_ep]
            batch_loss = concat([reshape(l, (1,)) for l in losses], axis=0).mean()
            batch_loss.backward()
            optimizer.step()
            sums += stats / len(batch)
            batches += 1

        stats_row = EpochStats(epoch, *(sums / batches))
        if val_samples and (epoch % settings.log_every == 0 or epoch == settings.epochs - 1):
            stats_row.val_acc_mnm, stats_row.val_acc_ep = evaluate_pretrain(
                model, val_samples, class_counts, mask_cfg, settings.edge_ratio, settings.seed + epoch
            )
        history.append(stats_row)

        if out_path is not None and settings.checkpoint_every and (epoch + 1) % settings.checkpoint_every == 0:
            save_checkpoint(out_path / f"encoder_epoch{epoch + 1}.json", model.state_dict(), {"epoch": epoch + 1})

    if out_path is not None:
        save_checkpoint(out_path / "encoder.json", model.state_dict(), {"epochs": settings.epochs})
        write_pretrain_log(out_path / "pretrain_log.csv", history)
    return history


def write_pretrain_log(path: str | Path, history: list[EpochStats]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss_mnm", "loss_ep", "acc_mnm", "acc_ep", "val_acc_mnm", "val_acc_ep"])
        for row in history:
            writer.writerow(
                [row.epoch, f"{row.loss_mnm:.6f}", f"{row.loss_ep:.6f}", f"{row.acc_mnm:.6f}",
                 f"{row.acc_ep:.6f}", f"{row.val_acc_mnm:.6f}", f"{row.val_acc_ep:.6f}"]
            )
