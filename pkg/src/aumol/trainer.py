"""Staged training: AdamW, global-norm clipping, warmup + linear decay, freeze schedule."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, NumericError
from .model import COMPONENTS, AuMolModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stage:
    epochs: int
    trainable: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "trainable", frozenset(self.trainable))
        if self.epochs < 1:
            raise ConfigError(f"stage epochs must be >= 1, got {self.epochs}")
        if not self.trainable:
            raise ConfigError("a stage must train at least one component")
        unknown = sorted(self.trainable - set(COMPONENTS))
        if unknown:
            raise ConfigError(f"unknown components {unknown}; expected a subset of {COMPONENTS}")


@dataclass(frozen=True)
class StagePlan:
    stages: tuple[Stage, ...] = (
        Stage(2, frozenset({"adapter"})),
        Stage(1, frozenset({"encoder"})),
        Stage(1, frozenset({"decoder_lora"})),
    )

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ConfigError("stage plan is empty")

    @property
    def total_epochs(self) -> int:
        return sum(s.epochs for s in self.stages)

    def stage_of_epoch(self, epoch: int) -> int:
        """Index of the stage active during 0-based ``epoch``."""
        if epoch < 0:
            raise ContractError(f"epoch must be >= 0, got {epoch}")
        end = 0
        for i, stage in enumerate(self.stages):
            end += stage.epochs
            if epoch < end:
                return i
        raise ContractError(f"epoch {epoch} is past the plan's {self.total_epochs} epochs")

    @classmethod
    def from_list(cls, items: Iterable[Mapping]) -> StagePlan:
        return cls(tuple(Stage(int(d["epochs"]), frozenset(d["trainable"])) for d in items))

    def to_list(self) -> list[dict]:
        return [{"epochs": s.epochs, "trainable": sorted(s.trainable)} for s in self.stages]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    warmup_steps: int = 16
    total_steps: int | None = None
    base_lr: float = 3e-4
    clip_norm: float = 1.0
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    alpha: float = 1.0

    def problems(self) -> list[str]:
        out = []
        if self.batch_size < 1:
            out.append(f"train.batch_size must be >= 1 (got {self.batch_size})")
        if self.warmup_steps < 0:
            out.append(f"train.warmup_steps must be >= 0 (got {self.warmup_steps})")
        if self.total_steps is not None and self.warmup_steps >= self.total_steps:
            out.append(f"train.warmup_steps ({self.warmup_steps}) must be < total_steps ({self.total_steps})")
        if not self.clip_norm > 0:
            out.append(f"train.clip_norm must be > 0 (got {self.clip_norm})")
        if not self.base_lr > 0:
            out.append(f"train.base_lr must be > 0 (got {self.base_lr})")
        if self.weight_decay < 0:
            out.append(f"train.weight_decay must be >= 0 (got {self.weight_decay})")
        if not all(0 <= b < 1 for b in self.betas):
            out.append(f"train.betas must lie in [0, 1) (got {self.betas})")
        return out


def lr_at(step: int, cfg: TrainConfig, total_steps: int | None = None) -> float:
    """Linear warmup from 0 to ``base_lr`` at ``warmup_steps``, then linear decay to 0."""
    total = cfg.total_steps if total_steps is None else total_steps
    if total is None:
        raise ContractError("lr_at needs total_steps")
    if not 0 <= step <= total:
        raise ContractError(f"step {step} outside [0, {total}]")
    warm = cfg.warmup_steps
    if warm >= total:
        raise ContractError(f"warmup_steps ({warm}) must be < total_steps ({total})")
    if step <= warm:
        return cfg.base_lr * step / warm if warm else cfg.base_lr
    return cfg.base_lr * (total - step) / (total - warm)


def _grad_items(grads) -> list[tuple[str, np.ndarray]]:
    if isinstance(grads, Mapping):
        items = [(k, v.grad if isinstance(v, Tensor) else v) for k, v in grads.items()]
    else:
        items = [(str(i), g.grad if isinstance(g, Tensor) else g) for i, g in enumerate(grads)]
    return [(k, g) for k, g in items if g is not None]


def global_grad_norm(grads) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for _, g in _grad_items(grads)))


def clip_grad_norm(grads, max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``.

    ``grads`` maps names to arrays (or to tensors, whose ``.grad`` is used).
    Returns the scale factor applied (1.0 when no clipping happened).
    """
    if not max_norm > 0:
        raise ContractError(f"max_norm must be positive, got {max_norm}")
    items = _grad_items(grads)
    for name, g in items:
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name}")
    norm = math.sqrt(sum(float(np.sum(g * g)) for _, g in items))
    if norm <= max_norm:
        return 1.0
    scale = max_norm / norm
    for _, g in items:
        g *= scale
    return scale


@dataclass
class OptimizerState:
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    base_lr: float = 3e-4
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray | None] | None,
               state: OptimizerState, lr: float) -> None:
    """One bias-corrected Adam update with decoupled weight decay, in place.

    ``grads`` defaults to each parameter's ``.grad``; a missing gradient counts
    as zero. Only the parameters in ``params`` are touched.
    """
    state.step += 1
    b1, b2 = state.betas
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = p.grad if grads is None else grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        with np.errstate(invalid="ignore", over="ignore"):
            update = (m / c1) / (np.sqrt(v / c2) + state.eps)
            new = p.data * (1.0 - lr * state.weight_decay) - lr * update
        if not np.all(np.isfinite(new)):
            raise NumericError(f"AdamW produced non-finite values for {name} at step {state.step}")
        p.data = new


def apply_stage(model: AuMolModel, stage: Stage) -> dict[str, Tensor]:
    """Freeze everything except the stage's components; returns the trainable set."""
    for component in stage.trainable:
        if component not in COMPONENTS:
            raise ConfigError(f"unknown component {component!r}")
    model.requires_grad_(False)
    model.zero_grad()
    trainable: dict[str, Tensor] = {}
    for component in sorted(stage.trainable):
        trainable.update(model.component_parameters(component))
    for p in trainable.values():
        p.requires_grad = True
    return trainable


@dataclass(frozen=True)
class Example:
    features: np.ndarray
    transcript: str
    utterance_id: str = ""


@dataclass
class TrainResult:
    log: list[dict]
    total_steps: int
    checkpoints: list[object] = field(default_factory=list)


def steps_per_epoch(n_examples: int, batch_size: int) -> int:
    return math.ceil(n_examples / batch_size)


CheckpointHook = Callable[[AuMolModel, int, int, str], object]


def train(model: AuMolModel, dataset: Sequence[Example], cfg: TrainConfig = TrainConfig(),
          plan: StagePlan = StagePlan(), log_path: str | Path | None = None,
          checkpoint: CheckpointHook | None = None) -> TrainResult:
    """Run the staged schedule; one optimiser update per batch.

    The optimiser state is reset at every stage boundary. ``checkpoint`` is
    called as ``checkpoint(model, stage_index, step, tag)`` after every epoch
    (tag ``epoch-<n>``) and once more at the end (tag ``final``).
    """
    if not dataset:
        raise ContractError("training dataset is empty")
    problems = cfg.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    per_epoch = steps_per_epoch(len(dataset), cfg.batch_size)
    total = plan.total_epochs * per_epoch
    if cfg.total_steps is not None and cfg.total_steps != total:
        raise ConfigError(f"total_steps={cfg.total_steps} but the plan runs {total} updates "
                          f"({plan.total_epochs} epochs x {per_epoch} batches)")
    if cfg.warmup_steps >= total:
        raise ConfigError(f"warmup_steps ({cfg.warmup_steps}) must be < total_steps ({total})")

    rng = np.random.default_rng(cfg.seed)
    records: list[dict] = []
    saved: list[object] = []
    sink = open(log_path, "w", encoding="utf-8") if log_path else None
    step = 0
    try:
        epoch = 0
        for stage_index, stage in enumerate(plan.stages):
            params = apply_stage(model, stage)
            state = OptimizerState(cfg.betas, cfg.eps, cfg.weight_decay, cfg.base_lr)
            log.info("stage %d: training %s (%d tensors)", stage_index, sorted(stage.trainable), len(params))
            for _ in range(stage.epochs):
                order = rng.permutation(len(dataset))
                for start in range(0, len(order), cfg.batch_size):
                    step += 1
                    batch = [dataset[i] for i in order[start:start + cfg.batch_size]]
                    feats = np.stack([ex.features for ex in batch])
                    model.zero_grad()
                    try:
                        loss, parts = model.loss(feats, [ex.transcript for ex in batch], cfg.alpha)
                        if not math.isfinite(parts.total):
                            raise NumericError("loss is not finite")
                        ad.backward(loss)
                        grad_norm = global_grad_norm(params)
                        clip_grad_norm(params, cfg.clip_norm)
                        lr = lr_at(step, cfg, total)
                        adamw_step(params, None, state, lr)
                    except NumericError as exc:
                        raise NumericError(f"training aborted at step {step}: {exc}") from exc
                    record = {"step": step, "epoch": epoch, "stage": stage_index, "lr": lr,
                              **{k: v for k, v in parts.as_dict().items() if k != "alpha"},
                              "grad_norm": grad_norm}
                    records.append(record)
                    if sink:
                        sink.write(json.dumps(record) + "\n")
                    log.debug("step %d %s", step, record)
                epoch += 1
                if checkpoint:
                    saved.append(checkpoint(model, stage_index, step, f"epoch-{epoch}"))
        model.zero_grad()
        if checkpoint:
            saved.append(checkpoint(model, len(plan.stages) - 1, step, "final"))
    finally:
        if sink:
            sink.close()
    return TrainResult(records, total, saved)
