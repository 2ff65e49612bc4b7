"""Output (cross-entropy) loss, audio/text alignment loss and their weighted total."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, ShapeError


@dataclass(frozen=True)
class LossBreakdown:
    output_loss: float
    alignment_loss: float
    alpha: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {
            "output_loss": self.output_loss,
            "alignment_loss": self.alignment_loss,
            "alpha": self.alpha,
            "total": self.total,
        }


@dataclass(frozen=True)
class AlignmentTerms:
    """Diagnostic view of one alignment-loss evaluation."""

    loss: Tensor
    l1_mean: float
    l1_sum: float
    cosine_term: float
    degenerate_steps: int


def output_loss(logits: Tensor, labels, mask=None) -> Tensor:
    """Mean over unmasked rows of ``-log softmax(logits)[label]``."""
    logits = ad.as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.size:
        raise ShapeError(f"output_loss: logits {logits.shape} vs {labels.size} labels")
    mask = np.ones(labels.size, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(-1)
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise ContractError("output_loss: every position is masked out")
    vocab = logits.shape[1]
    picked = labels[rows]
    if picked.min() < 0 or picked.max() >= vocab:
        raise ContractError(f"output_loss: label ids must lie in [0, {vocab})")
    logp = ad.log_softmax(logits[rows], axis=-1)
    return -ad.getitem(logp, (np.arange(rows.size), picked)).mean()


def _check_pair(e_t: Tensor, e_u: Tensor) -> None:
    if e_t.shape != e_u.shape:
        raise ShapeError(f"alignment_loss: e_t {e_t.shape} and e_u {e_u.shape} differ")
    if e_t.ndim < 1 or e_t.data.size == 0:
        raise ShapeError(f"alignment_loss: empty embeddings {e_t.shape}")


def alignment_terms(e_t, e_u) -> AlignmentTerms:
    """``mean|e_t - e_u| + 1 - mean_t cos(e_t[t], e_u[t])`` with diagnostics.

    Cosine is taken per time step over the last axis; a step where either
    vector has zero norm counts as cosine 0 and is reported in
    ``degenerate_steps``.
    """
    e_t, e_u = ad.as_tensor(e_t), ad.as_tensor(e_u)
    _check_pair(e_t, e_u)
    l1 = ad.l1_distance(e_t, e_u)
    cos = ad.cosine_similarity(e_t, e_u, axis=-1)
    cos_term = 1.0 - cos.mean()
    na = np.linalg.norm(e_t.data, axis=-1)
    nb = np.linalg.norm(e_u.data, axis=-1)
    return AlignmentTerms(
        loss=l1 + cos_term,
        l1_mean=float(l1.data),
        l1_sum=float(np.abs(e_t.data - e_u.data).sum()),
        cosine_term=float(cos_term.data),
        degenerate_steps=int(np.sum((na == 0) | (nb == 0))),
    )


def alignment_loss(e_t, e_u) -> Tensor:
    return alignment_terms(e_t, e_u).loss


def total_loss(out, align, alpha: float = 1.0) -> LossBreakdown:
    out_v = float(out.data) if isinstance(out, Tensor) else float(out)
    align_v = float(align.data) if isinstance(align, Tensor) else float(align)
    return LossBreakdown(out_v, align_v, float(alpha), out_v + float(alpha) * align_v)


def weighted_total(out: Tensor, align: Tensor, alpha: float = 1.0) -> Tensor:
    """Differentiable ``out + alpha * align``."""
    return out + align * float(alpha)


def interpolation_matrix(t_out: int, t_in: int) -> np.ndarray:
    """``(t_out, t_in)`` matrix resampling a sequence linearly along time."""
    if t_in < 1 or t_out < 1:
        raise ShapeError(f"cannot resample between lengths {t_in} and {t_out}")
    m = np.zeros((t_out, t_in))
    if t_in == 1:
        m[:, 0] = 1.0
        return m
    pos = np.linspace(0.0, t_in - 1, t_out)
    lo = np.minimum(np.floor(pos).astype(int), t_in - 2)
    frac = pos - lo
    rows = np.arange(t_out)
    m[rows, lo] = 1.0 - frac
    m[rows, lo + 1] += frac
    return m


def match_lengths(e_t: Tensor, e_u: np.ndarray) -> tuple[Tensor, Tensor]:
    """Resample the shorter of ``e_t`` (differentiable) and ``e_u`` (constant)."""
    ta, tu = e_t.shape[-2], e_u.shape[-2]
    if ta == tu:
        return e_t, Tensor(e_u)
    if tu < ta:
        return e_t, Tensor(interpolation_matrix(ta, tu) @ e_u)
    return Tensor(interpolation_matrix(tu, ta)) @ e_t, Tensor(e_u)
