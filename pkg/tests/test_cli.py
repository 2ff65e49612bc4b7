import json

import numpy as np
import pytest
import yaml

from aumol import checkpoint as ck
from aumol.cli import main
from aumol.frontend import AudioBuffer, read_feature_dump, write_wav
from aumol.synth import write_corpus

SMALL_MODEL = dict(d_enc=8, enc_layers=1, d_hidden_adapter=8, d_llm=8, dec_layers=1, n_heads=2,
                   max_audio_frames=100, max_text_len=16, lora_rank=2)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return write_corpus(tmp_path_factory.mktemp("corpus"), 4, seed=1)


def _config(tmp_path, manifest, **top):
    cfg = {"seed": 0, "model": SMALL_MODEL, "train": {"batch_size": 2, "warmup_steps": 2, "base_lr": 1e-3},
           "paths": {"train_manifest": str(manifest), "out_dir": str(tmp_path / "run")}, **top}
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


@pytest.fixture(scope="module")
def trained(tmp_path_factory, corpus):
    tmp = tmp_path_factory.mktemp("train")
    assert main(["train", "--config", str(_config(tmp, corpus))]) == 0
    return tmp / "run"


def test_featurize_full_scale_shape_and_determinism(tmp_path, capsys):
    rng = np.random.default_rng(0)
    write_wav(tmp_path / "a.wav", AudioBuffer(0.3 * rng.standard_normal(30 * 16000).clip(-1, 1), 16000))
    assert main(["featurize", str(tmp_path / "a.wav"), str(tmp_path / "a.feat")]) == 0
    assert "(80, 3000)" in capsys.readouterr().out
    assert read_feature_dump(tmp_path / "a.feat").shape == (80, 3000)
    assert main(["featurize", str(tmp_path / "a.wav"), str(tmp_path / "b.feat")]) == 0
    assert (tmp_path / "a.feat").read_bytes() == (tmp_path / "b.feat").read_bytes()


def test_featurize_resamples_other_rates(tmp_path):
    write_wav(tmp_path / "a.wav", AudioBuffer(np.zeros(8000 * 30), 8000))
    assert main(["featurize", str(tmp_path / "a.wav"), str(tmp_path / "a.feat")]) == 0
    assert read_feature_dump(tmp_path / "a.feat").shape == (80, 3000)


def test_featurize_corrupt_wav_names_file(tmp_path, capsys):
    bad = tmp_path / "broken.wav"
    bad.write_bytes(b"RIFF\x00\x00garbage")
    assert main(["featurize", str(bad), str(tmp_path / "x.feat")]) == 1
    err = capsys.readouterr().err
    assert "broken.wav" in err and "error" in err
    assert not (tmp_path / "x.feat").exists()


def test_train_writes_epoch_and_final_checkpoints(trained):
    names = sorted(p.name for p in trained.glob("*.aumc"))
    assert names == ["epoch-1.aumc", "epoch-2.aumc", "epoch-3.aumc", "epoch-4.aumc", "final.aumc"]
    rows = [json.loads(line) for line in (trained / "train_log.jsonl").read_text().splitlines()]
    assert {r["stage"] for r in rows} == {0, 1, 2}
    assert yaml.safe_load((trained / "config.yaml").read_text())["model"]["d_llm"] == 8


def test_train_alpha_zero_still_logs_alignment(tmp_path, corpus):
    cfg = _config(tmp_path, corpus, stages=[{"epochs": 2, "trainable": ["adapter"]}])
    assert main(["train", "--config", str(cfg), "--alpha", "0", "--adapter-variant", "no_relu"]) == 0
    rows = [json.loads(line) for line in (tmp_path / "run" / "train_log.jsonl").read_text().splitlines()]
    assert all(r["alignment_loss"] > 0 and r["total"] == r["output_loss"] for r in rows)
    model, _ = ck.load_checkpoint(tmp_path / "run" / "final.aumc")
    assert model.config.adapter_variant == "no_relu"


def test_train_rejects_bad_config(tmp_path, corpus, capsys):
    cfg = _config(tmp_path, corpus)
    assert main(["train", "--config", str(cfg), "--alpha", "-1"]) == 1
    assert "alpha" in capsys.readouterr().err


def test_transcribe_single_and_manifest(tmp_path, trained, corpus, capsys):
    final = str(trained / "final.aumc")
    assert main(["transcribe", "--checkpoint", final, "--audio", str(corpus.parent / "utt0002.wav"),
                 "--report-format", "structured"]) == 0
    single = json.loads(capsys.readouterr().out)["transcript"]
    out = tmp_path / "hyp.jsonl"
    assert main(["transcribe", "--checkpoint", final, "--manifest", str(corpus), "--out", str(out)]) == 0
    hyps = [json.loads(line) for line in out.read_text().splitlines()]
    assert [h["id"] for h in hyps] == ["utt0000", "utt0001", "utt0002", "utt0003"]
    assert hyps[2]["transcript"] == single


def test_transcribe_truncated_checkpoint(tmp_path, trained, corpus, capsys):
    cut = tmp_path / "cut.aumc"
    cut.write_bytes((trained / "final.aumc").read_bytes()[:-10])
    assert main(["transcribe", "--checkpoint", str(cut), "--audio", str(corpus.parent / "utt0000.wav")]) == 1
    err = capsys.readouterr().err
    assert "cut.aumc" in err and "crc" in err.lower()


def _write(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_evaluate_identical_is_zero(tmp_path, corpus, capsys):
    out = tmp_path / "r.json"
    assert main(["evaluate", str(corpus), str(corpus), "--out", str(out), "--report-format", "structured"]) == 0
    summary = json.loads(out.read_text())["summary"]
    assert summary["wer"] == 0.0


def test_evaluate_worked_entity_example(tmp_path, capsys):
    combined = _write(tmp_path / "pairs.jsonl", [{
        "id": "u1", "ref": "start metoprolol succinate today", "hyp": "start metoprolol suxinate today",
        "entities": [{"text": "metoprolol succinate"}]}])
    assert main(["evaluate", str(combined), "--model-name", "toy", "--out", str(tmp_path / "r.txt")]) == 0
    table = capsys.readouterr().out
    assert "toy" in table and "0.2500" in table and "0.5000" in table
    assert (tmp_path / "r.txt").read_text().startswith("Model")


def test_evaluate_macro_and_jobs_agree(tmp_path, capsys):
    rows = [{"id": str(i), "ref": "a b c d", "hyp": "a x c" if i % 2 else "a b c d",
             "entities": [{"text": "b c"}]} for i in range(6)]
    combined = _write(tmp_path / "pairs.jsonl", rows)
    results = []
    for extra in ([], ["--jobs", "2"]):
        assert main(["evaluate", str(combined), "--report-format", "structured",
                     "--out", str(tmp_path / "r.json"), *extra]) == 0
        results.append(json.loads(capsys.readouterr().out)["summary"])
    assert results[0] == results[1]


def test_evaluate_id_mismatch_writes_nothing(tmp_path, capsys):
    ref = _write(tmp_path / "ref.jsonl", [{"id": "a", "transcript": "x"}, {"id": "b", "transcript": "y"}])
    hyp = _write(tmp_path / "hyp.jsonl", [{"id": "a", "transcript": "x"}, {"id": "c", "transcript": "y"}])
    out = tmp_path / "report.txt"
    assert main(["evaluate", str(ref), str(hyp), "--out", str(out)]) == 1
    err = capsys.readouterr().err
    assert "'b'" in err and "'c'" in err
    assert not out.exists()


def test_inspect_checkpoint(trained, capsys):
    assert main(["inspect-checkpoint", str(trained / "epoch-2.aumc"), "--report-format", "structured"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["config"]["d_llm"] == 8 and info["extra"]["tag"] == "epoch-2"
    assert info["n_parameters"] == sum(int(np.prod(s)) for s in info["tensors"].values())


def test_make_toy_data(tmp_path, capsys):
    assert main(["make-toy-data", "--out", str(tmp_path / "d"), "--n", "3", "--seed", "5"]) == 0
    lines = (tmp_path / "d" / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == 3 and all((tmp_path / "d" / json.loads(x)["audio_path"]).is_file() for x in lines)
