import json
import math

import numpy as np
import pytest

from aumol.autodiff import Tensor
from aumol.errors import ConfigError, ContractError, NumericError
from aumol.model import AuMolModel
from aumol.trainer import (
    Example, OptimizerState, Stage, StagePlan, TrainConfig, adamw_step, apply_stage, clip_grad_norm,
    global_grad_norm, lr_at, train,
)


def tiny_dataset(cfg, n=8, seed=0):
    rng = np.random.default_rng(seed)
    words = ["ab", "ba c", "cab", "a", "bb a", "c c", "abc", "ca"]
    return [Example(rng.normal(size=(cfg.n_mels, cfg.max_audio_frames)), words[i % len(words)], f"u{i}")
            for i in range(n)]


def test_lr_schedule_examples():
    cfg = TrainConfig(warmup_steps=512, total_steps=10000, base_lr=1e-4)
    assert lr_at(0, cfg) == 0
    assert lr_at(512, cfg) == 1e-4
    assert lr_at(10000, cfg) == 0
    assert lr_at(256, cfg) == pytest.approx(5e-5)
    with pytest.raises(ContractError):
        lr_at(10001, cfg)
    with pytest.raises(ContractError):
        lr_at(-1, cfg)


def test_lr_schedule_shape():
    cfg = TrainConfig(warmup_steps=7, total_steps=30, base_lr=2.0)
    values = [lr_at(s, cfg) for s in range(31)]
    assert int(np.argmax(values)) == 7
    assert np.allclose(np.diff(values[:8]), 2.0 / 7)
    assert np.allclose(np.diff(values[7:]), -2.0 / 23)


def test_clip_examples():
    g = {"a": np.array([0.3, 0.4])}
    assert clip_grad_norm(g, 1.0) == 1.0 and np.array_equal(g["a"], [0.3, 0.4])
    g = {"a": np.array([1.2, 1.6])}
    assert clip_grad_norm(g, 1.0) == pytest.approx(0.5)
    assert abs(global_grad_norm(g) - 1.0) < 1e-9


def test_clip_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        grads = {f"p{i}": rng.normal(size=rng.integers(1, 5, 2)) * rng.uniform(0, 2) for i in range(3)}
        before = global_grad_norm(grads)
        clip_grad_norm(grads, 1.0)
        assert global_grad_norm(grads) == pytest.approx(min(before, 1.0), abs=1e-9)
        assert global_grad_norm(grads) <= 1.0 + 1e-9


def test_clip_reports_nonfinite_parameter():
    with pytest.raises(NumericError, match="decoder.head.weight"):
        clip_grad_norm({"ok": np.ones(2), "decoder.head.weight": np.array([np.nan])}, 1.0)


def test_adamw_zero_grad_no_decay_is_noop():
    p = {"w": Tensor(np.array([1.0, -2.0]), requires_grad=True)}
    adamw_step(p, {"w": np.zeros(2)}, OptimizerState(), lr=0.1)
    assert np.array_equal(p["w"].data, [1.0, -2.0])


def test_adamw_scalar_recurrence():
    b1, b2, eps, lr, wd, g = 0.9, 0.999, 1e-8, 0.01, 0.1, 0.5
    w, m, v = 2.0, 0.0, 0.0
    p = {"w": Tensor(np.array([2.0]))}
    state = OptimizerState((b1, b2), eps, wd)
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w = w * (1 - lr * wd) - lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        adamw_step(p, {"w": np.array([g])}, state, lr)
        assert p["w"].data[0] == pytest.approx(w, abs=1e-15)


def test_adamw_decoupled_decay():
    p = {"w": Tensor(np.array([3.0]))}
    state = OptimizerState(weight_decay=0.5)
    for _ in range(3):
        adamw_step(p, {"w": np.zeros(1)}, state, lr=0.1)
    assert p["w"].data[0] == pytest.approx(3.0 * 0.95 ** 3)


def test_adamw_nonfinite_update():
    p = {"w": Tensor(np.array([1.0]))}
    with pytest.raises(NumericError):
        adamw_step(p, {"w": np.array([np.inf])}, OptimizerState(), lr=0.1)


def test_default_plan():
    plan = StagePlan()
    assert plan.total_epochs == 4
    assert [plan.stage_of_epoch(e) for e in range(4)] == [0, 0, 1, 2]
    with pytest.raises(ConfigError):
        Stage(1, frozenset({"vocoder"}))
    with pytest.raises(ConfigError):
        Stage(0, frozenset({"adapter"}))


def test_apply_stage_per_epoch(tiny_model):
    plan = StagePlan()
    expected = {0: "adapter", 1: "adapter", 2: "encoder", 3: "decoder_lora"}
    for epoch, component in expected.items():
        trainable = apply_stage(tiny_model, plan.stages[plan.stage_of_epoch(epoch)])
        assert set(trainable) == set(tiny_model.component_parameters(component))
        flagged = {n for n, p in tiny_model.named_parameters() if p.requires_grad}
        assert flagged == set(trainable)
    assert all(".lora." in n for n in trainable)


def test_train_reduces_loss_and_logs(tiny_config, tmp_path):
    model = AuMolModel(tiny_config)
    data = tiny_dataset(tiny_config)
    plan = StagePlan((Stage(100, frozenset({"adapter", "encoder", "decoder"})),))
    cfg = TrainConfig(batch_size=4, warmup_steps=10, base_lr=3e-3, weight_decay=0.0)
    result = train(model, data, cfg, plan, log_path=tmp_path / "log.jsonl")
    assert result.total_steps == 200 and len(result.log) == 200
    assert result.log[-1]["total"] < result.log[0]["total"]
    lines = [json.loads(x) for x in (tmp_path / "log.jsonl").read_text().splitlines()]
    assert lines == result.log
    assert set(lines[0]) == {"step", "epoch", "stage", "lr", "output_loss", "alignment_loss", "total", "grad_norm"}


def test_training_is_deterministic(tiny_config):
    def run():
        model = AuMolModel(tiny_config)
        train(model, tiny_dataset(tiny_config), TrainConfig(batch_size=3, warmup_steps=2))
        return model.state_dict()

    a, b = run(), run()
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_frozen_parameters_untouched_per_stage(tiny_config):
    model = AuMolModel(tiny_config)
    snapshots = [{k: v.tobytes() for k, v in model.state_dict().items()}]

    def hook(m, stage, step, tag):
        snapshots.append({k: v.tobytes() for k, v in m.state_dict().items()})
        return tag

    plan = StagePlan()
    result = train(model, tiny_dataset(tiny_config), TrainConfig(batch_size=4, warmup_steps=2), plan,
                   checkpoint=hook)
    assert result.checkpoints == ["epoch-1", "epoch-2", "epoch-3", "epoch-4", "final"]
    for epoch in range(4):
        active = plan.stages[plan.stage_of_epoch(epoch)].trainable
        allowed = set().union(*(model.component_parameters(c) for c in active))
        before, after = snapshots[epoch], snapshots[epoch + 1]
        changed = {k for k in before if before[k] != after[k]}
        assert changed <= allowed
        assert changed


def test_train_config_errors(tiny_config):
    model = AuMolModel(tiny_config)
    with pytest.raises(ContractError):
        train(model, [], TrainConfig())
    with pytest.raises(ConfigError):
        train(model, tiny_dataset(tiny_config), TrainConfig(warmup_steps=100))


def test_nan_aborts_with_step(tiny_config):
    model = AuMolModel(tiny_config)
    data = tiny_dataset(tiny_config)
    model.decoder.head.weight.data[:] = np.nan
    with pytest.raises(NumericError, match="step 1"):
        train(model, data, TrainConfig(batch_size=4, warmup_steps=2))
