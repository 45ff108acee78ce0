"""Knowledge distillation from the frozen netlist-side teacher into the CDFG
student: align the activations entering each predictor's final linear layer
with a cosine + MSE objective, mixed with the quality loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn.checkpoint import params_checksum
from .nn.model import EncoderModel, TeacherModel
from .nn.tensor import Tensor, no_grad
from .quality import (
    MetricReport,
    QualityItem,
    RegressorSettings,
    TrainRow,
    log_cosh,
    train_quality_model,
)


class DimensionMismatch(ValueError):
    pass


@dataclass
class DistillSettings:
    tau: float = 0.7  # cosine vs MSE mix inside the KD term
    mu: float = 0.5  # quality vs KD mix in the total loss


def _kd_single(z_student: Tensor, z_teacher: np.ndarray, tau: float) -> Tensor:
    norm_t = float(np.linalg.norm(z_teacher))
    norm_s = float(np.linalg.norm(z_student.data))
    if norm_t < 1e-12 or norm_s < 1e-12:
        cos_term = Tensor(1.0)  # degenerate vector: treat as fully misaligned
    else:
        dot = (z_student * z_teacher).sum()
        norm_s_t = ((z_student * z_student).sum()) ** 0.5
        cos_term = 1.0 - dot / (norm_s_t * norm_t)
    diff = z_student - z_teacher
    mse_term = (diff * diff).mean()
    return tau * cos_term + (1.0 - tau) * mse_term


def kd_loss(z_student: Tensor | np.ndarray, z_teacher: Tensor | np.ndarray, tau: float = 0.7) -> Tensor:
    """tau * (1 - cos(a, b)) + (1 - tau) * mean((a - b)^2), batch-averaged.

    The teacher side is always treated as a constant (gradient-detached).
    Vectors with norm < 1e-12 make the cosine term 1.
    """
    z_s = z_student if isinstance(z_student, Tensor) else Tensor(z_student)
    z_t = z_teacher.data if isinstance(z_teacher, Tensor) else np.asarray(z_teacher, dtype=np.float64)
    if z_s.data.shape != z_t.shape:
        raise DimensionMismatch(f"student {z_s.data.shape} vs teacher {z_t.shape}")
    if z_s.data.ndim == 1:
        return _kd_single(z_s, z_t, tau)
    if z_s.data.ndim == 2:
        from .nn.tensor import concat, reshape

        per_sample = [
            reshape(_kd_single(_row(z_s, i), z_t[i], tau), (1,)) for i in range(z_s.data.shape[0])
        ]
        return concat(per_sample, axis=0).mean()
    raise DimensionMismatch(f"unsupported rank {z_s.data.ndim}")


def _row(t: Tensor, i: int) -> Tensor:
    from .nn.tensor import gather_rows, reshape

    return reshape(gather_rows(t, np.array([i])), (t.data.shape[1],))


def teacher_penultimates(teacher: TeacherModel, items: list[QualityItem]) -> list[np.ndarray]:
    """Frozen-teacher penultimate activations, cached once per dataset."""
    outs = []
    with no_grad():
        for item in items:
            if item.netlist_x is None:
                raise ValueError(f"item {item.sample.design_id!r} has no netlist data for distillation")
            _, penult = teacher.predict(item.netlist_x, item.netlist_src, item.netlist_dst)
            outs.append(penult.data.copy())
    return outs


def train_student_with_kd(
    teacher: TeacherModel,
    student: EncoderModel,
    train_items: list[QualityItem],
    val_items: list[QualityItem],
    settings: RegressorSettings | None = None,
    distill: DistillSettings | None = None,
) -> tuple[MetricReport, list[TrainRow]]:
    """Train the student with mu * L_quality + (1 - mu) * L_kd.

    The teacher never updates (asserted via checksum). With mu = 1 the loop is
    exactly plain regression, loss for loss. Validation uses the student only.
    """
    distill = distill or DistillSettings()
    if teacher.hidden_dim != student.hidden_dim:
        raise DimensionMismatch(
            f"teacher penultimate width {teacher.hidden_dim} != student {student.hidden_dim}"
        )
    checksum_before = params_checksum(teacher.state_dict())

    if distill.mu >= 1.0:
        loss_fn = None  # degenerates to plain regression
    else:
        penults = teacher_penultimates(teacher, train_items)
        index = {id(item): i for i, item in enumerate(train_items)}

        def loss_fn(item: QualityItem, pred: Tensor, penult: Tensor) -> Tensor:
            l_qe = log_cosh(pred - item.log_target)
            l_kd = kd_loss(penult, penults[index[id(item)]], distill.tau)
            return distill.mu * l_qe + (1.0 - distill.mu) * l_kd

    report, history = train_quality_model(student, train_items, val_items, settings, loss_fn=loss_fn)

    if params_checksum(teacher.state_dict()) != checksum_before:
        raise RuntimeError("teacher parameters changed during distillation")
    return report, history
