"""Run configuration: one YAML file holding model, training, stage plan and paths.

Validation collects every problem before raising, and unknown keys are errors.

Example::

    seed: 0
    alpha: 1.0             # 0 removes the alignment term, 2 doubles it
    model:
      adapter_variant: full
      downsample_factor: 2
    train:
      batch_size: 4
      warmup_steps: 16
    stages:
      - {epochs: 2, trainable: [adapter]}
      - {epochs: 1, trainable: [encoder]}
      - {epochs: 1, trainable: [decoder_lora]}
    paths:
      train_manifest: data/manifest.jsonl
      out_dir: runs/toy
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .model import COMPONENTS, ModelConfig
from .trainer import Stage, StagePlan, TrainConfig

_TOP_KEYS = {"seed", "alpha", "model", "train", "stages", "paths"}
_MODEL_KEYS = {f.name for f in dataclasses.fields(ModelConfig)} - {"seed"}
_TRAIN_KEYS = {"batch_size", "warmup_steps", "total_steps", "base_lr", "clip_norm", "weight_decay", "betas", "eps"}
_PATH_KEYS = {"train_manifest", "out_dir"}


@dataclass
class RunConfig:
    model: ModelConfig
    train: TrainConfig
    plan: StagePlan
    train_manifest: Path | None = None
    out_dir: Path = field(default_factory=lambda: Path("runs"))

    @property
    def seed(self) -> int:
        return self.train.seed

    @property
    def alpha(self) -> float:
        return self.train.alpha

    def to_dict(self) -> dict:
        model = self.model.to_dict()
        model.pop("seed")
        train = dataclasses.asdict(self.train)
        seed, alpha = train.pop("seed"), train.pop("alpha")
        train["betas"] = list(train["betas"])
        return {
            "seed": seed,
            "alpha": alpha,
            "model": model,
            "train": train,
            "stages": self.plan.to_list(),
            "paths": {"train_manifest": str(self.train_manifest) if self.train_manifest else None,
                      "out_dir": str(self.out_dir)},
        }


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _unknown(section: str, data: dict, allowed: set[str]) -> list[str]:
    return [f"{section}{k}: unknown key" for k in sorted(set(data) - allowed)]


def validate(raw: dict, overrides: dict | None = None) -> tuple[dict, list[str]]:
    """Merge CLI overrides into ``raw`` and list every schema violation."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        return {}, ["config must be a mapping at the top level"]
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("seed", "alpha"):
            data[key] = value
        else:
            data.setdefault("model", {})[key] = value
    problems += _unknown("", data, _TOP_KEYS)

    seed = data.get("seed", 0)
    if not _is_int(seed) or seed < 0:
        problems.append(f"seed: must be a non-negative integer (got {seed!r})")
    alpha = data.get("alpha", 1.0)
    if not _is_number(alpha) or alpha < 0:
        problems.append(f"alpha: must be a non-negative number (got {alpha!r})")

    for section, allowed in (("model", _MODEL_KEYS), ("train", _TRAIN_KEYS), ("paths", _PATH_KEYS)):
        value = data.get(section, {})
        if not isinstance(value, dict):
            problems.append(f"{section}: must be a mapping")
            data[section] = {}
        else:
            problems += _unknown(f"{section}.", value, allowed)

    model = {k: v for k, v in data.get("model", {}).items() if k in _MODEL_KEYS}
    defaults = ModelConfig().to_dict()
    candidate = object.__new__(ModelConfig)
    for k, v in {**defaults, **model}.items():
        object.__setattr__(candidate, k, v)
    problems += candidate.problems()

    train = data.get("train", {})
    for key in ("batch_size", "warmup_steps"):
        if key in train and (not _is_int(train[key]) or train[key] < (1 if key == "batch_size" else 0)):
            problems.append(f"train.{key}: must be an integer >= {1 if key == 'batch_size' else 0} (got {train[key]!r})")
    if train.get("total_steps") is not None and not _is_int(train["total_steps"]):
        problems.append(f"train.total_steps: must be an integer (got {train['total_steps']!r})")
    for key in ("base_lr", "clip_norm", "eps"):
        if key in train and (not _is_number(train[key]) or train[key] <= 0):
            problems.append(f"train.{key}: must be a positive number (got {train[key]!r})")
    if "weight_decay" in train and (not _is_number(train["weight_decay"]) or train["weight_decay"] < 0):
        problems.append(f"train.weight_decay: must be a non-negative number (got {train['weight_decay']!r})")
    if "betas" in train:
        b = train["betas"]
        if not (isinstance(b, (list, tuple)) and len(b) == 2 and all(_is_number(x) and 0 <= x < 1 for x in b)):
            problems.append(f"train.betas: must be two numbers in [0, 1) (got {b!r})")
    warm, total = train.get("warmup_steps", TrainConfig.warmup_steps), train.get("total_steps")
    if _is_int(warm) and _is_int(total) and warm >= total:
        problems.append(f"train.warmup_steps ({warm}) must be < train.total_steps ({total})")

    stages = data.get("stages")
    if stages is not None:
        if not isinstance(stages, list) or not stages:
            problems.append("stages: must be a non-empty list")
        else:
            for i, st in enumerate(stages):
                if not isinstance(st, dict):
                    problems.append(f"stages[{i}]: must be a mapping")
                    continue
                problems += _unknown(f"stages[{i}].", st, {"epochs", "trainable"})
                if not _is_int(st.get("epochs")) or st.get("epochs", 0) < 1:
                    problems.append(f"stages[{i}].epochs: must be an integer >= 1 (got {st.get('epochs')!r})")
                comps = st.get("trainable")
                if not isinstance(comps, list) or not comps:
                    problems.append(f"stages[{i}].trainable: must be a non-empty list")
                else:
                    bad = [c for c in comps if c not in COMPONENTS]
                    if bad:
                        problems.append(f"stages[{i}].trainable: unknown components {bad}; allowed {list(COMPONENTS)}")
    return data, problems


def build(raw: dict, base_dir: Path | None = None, overrides: dict | None = None) -> RunConfig:
    data, problems = validate(raw, overrides)
    if problems:
        raise ConfigError("invalid run config:\n  " + "\n  ".join(problems))
    seed = data.get("seed", 0)
    model = ModelConfig(**{**data.get("model", {}), "seed": seed})
    train_raw = dict(data.get("train", {}))
    if "betas" in train_raw:
        train_raw["betas"] = tuple(train_raw["betas"])
    train = TrainConfig(**train_raw, seed=seed, alpha=float(data.get("alpha", 1.0)))
    plan = StagePlan.from_list(data["stages"]) if data.get("stages") else StagePlan()
    base = base_dir or Path(".")
    paths = data.get("paths", {})
    manifest = paths.get("train_manifest")
    return RunConfig(model, train, plan,
                     train_manifest=(base / manifest) if manifest else None,
                     out_dir=base / paths.get("out_dir", "runs"))


def load_run_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    return build(raw, path.parent, overrides)


def dump_run_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


__all__ = ["RunConfig", "Stage", "build", "dump_run_config", "load_run_config", "validate"]
