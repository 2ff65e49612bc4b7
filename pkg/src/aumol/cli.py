"""Command-line entry point: ``aumol <command> ...``.

Commands: make-toy-data, featurize, train, transcribe, evaluate, inspect-checkpoint.
Log verbosity comes from ``AUML_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from . import synth
from .config import dump_run_config, load_run_config
from .errors import AumolError, ContractError
from .frontend import FULL_SCALE_FRAMES, featurize, read_wav, resample, write_feature_dump
from .manifest import ManifestRecord, audio_file, id_mismatch, read_eval_records, read_manifest, write_manifest
from .metrics.scoring import EvalReport, TranscriptRecord, score_record
from .model import ADAPTER_VARIANTS, AuMolModel
from .trainer import Example, train

log = logging.getLogger("aumol")


def _setup_logging() -> None:
    level = os.environ.get("AUML_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _emit(args, text: str, payload: dict) -> None:
    if args.report_format == "structured":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _features_for(path: Path, frames: int) -> np.ndarray:
    audio = resample(read_wav(path))
    return featurize(audio, target_frames=frames).values


# ---------------------------------------------------------------------------
# commands


def cmd_make_toy_data(args) -> int:
    manifest = synth.write_corpus(args.out, args.n, seed=args.seed if args.seed is not None else 0,
                                  duration_s=args.duration)
    _emit(args, f"wrote {args.n} utterances to {manifest}", {"manifest": str(manifest), "n": args.n})
    return 0


def cmd_featurize(args) -> int:
    feats = _features_for(Path(args.audio), args.frames)
    write_feature_dump(args.out, feats)
    _emit(args, f"{args.out}: shape ({feats.shape[0]}, {feats.shape[1]})",
          {"path": str(args.out), "shape": list(feats.shape)})
    return 0


def cmd_train(args) -> int:
    overrides = {"seed": args.seed, "alpha": args.alpha, "adapter_variant": args.adapter_variant,
                 "downsample_factor": args.downsample}
    run = load_run_config(args.config, overrides)
    if run.train_manifest is None:
        raise ContractError(f"{args.config}: paths.train_manifest is required for training")
    records = read_manifest(run.train_manifest)
    out_dir = Path(args.out) if args.out else run.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.yaml").write_text(dump_run_config(run), encoding="utf-8")

    frames = run.model.max_audio_frames
    dataset = [Example(_features_for(audio_file(run.train_manifest, r), frames), r.transcript, r.id)
               for r in records]
    model = AuMolModel(run.model)
    log.info("seed %d, %d examples, plan %s", run.seed, len(dataset), run.plan.to_list())

    def save(m, stage, step, tag):
        return ckpt_io.save_checkpoint(out_dir / f"{tag}.aumc", m, stage, step, {"tag": tag, "seed": run.seed})

    result = train(model, dataset, run.train, run.plan, log_path=out_dir / "train_log.jsonl", checkpoint=save)
    last = result.log[-1]
    _emit(args,
          f"trained {result.total_steps} steps; final total {last['total']:.4f} "
          f"(output {last['output_loss']:.4f}, alignment {last['alignment_loss']:.4f}); "
          f"checkpoints: {', '.join(p.name for p in result.checkpoints)}",
          {"steps": result.total_steps, "final": last, "checkpoints": [str(p) for p in result.checkpoints]})
    return 0


def cmd_transcribe(args) -> int:
    model, _ = ckpt_io.load_checkpoint(args.checkpoint)
    frames = model.config.max_audio_frames
    if args.audio:
        text = model.greedy_decode(_features_for(Path(args.audio), frames)[None])[0]
        _emit(args, text, {"audio": args.audio, "transcript": text})
        return 0
    records = read_manifest(args.manifest)
    hyps = []
    for rec in records:
        text = model.greedy_decode(_features_for(audio_file(args.manifest, rec), frames)[None])[0]
        hyps.append(ManifestRecord(rec.id, text, rec.audio_path))
    out = Path(args.out) if args.out else Path(args.manifest).with_name("hypotheses.jsonl")
    write_manifest(out, hyps)
    _emit(args, f"wrote {len(hyps)} hypotheses to {out}", {"hypotheses": str(out), "n": len(hyps)})
    return 0


def _score(record: TranscriptRecord):
    return score_record(record)


def format_table(rows: list[tuple[str, float, float | None]]) -> str:
    lines = [f"{'Model':<24} {'WER':>8} {'EWER':>8}", "-" * 42]
    for name, w, e in rows:
        lines.append(f"{name:<24} {w:>8.4f} {('n/a' if e is None else f'{e:.4f}'):>8}")
    return "\n".join(lines)


def load_eval_records(reference: str, hypotheses: str | None) -> list[TranscriptRecord]:
    """Pair a reference and a hypothesis manifest by id, or read one combined file."""
    if hypotheses is None:
        return read_eval_records(reference)
    refs = read_manifest(reference, require_audio=False)
    hyps = read_manifest(hypotheses, require_audio=False)
    missing, extra = id_mismatch(refs, hyps)
    if missing or extra:
        raise ContractError(f"id sets differ between {reference} and {hypotheses}: "
                            f"missing from hypotheses {missing}; extra in hypotheses {extra}")
    by_id = {h.id: h for h in hyps}
    return [TranscriptRecord.from_annotations(r.id, r.transcript, by_id[r.id].transcript, r.entities)
            for r in refs]


def cmd_evaluate(args) -> int:
    records = load_eval_records(args.reference, args.hypotheses)
    if not records:
        raise ContractError(f"{args.reference}: nothing to score")
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            scores = list(pool.map(_score, records))
    else:
        scores = [_score(r) for r in records]
    report = EvalReport(scores, args.aggregate)
    name = args.model_name or Path(args.hypotheses or args.reference).stem
    payload = {"model": name, "summary": report.summary(), "utterances": [u.as_row() for u in report.utterances]}
    table = format_table([(name, report.wer, report.ewer)])
    out = Path(args.out or ("report.json" if args.report_format == "structured" else "report.txt"))
    if args.report_format == "structured":
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        rows = "\n".join(
            f"{u.utterance_id}\tWER {u.counts.wer:.4f}\tEWER "
            + ("n/a" if u.entities.ewer is None else f"{u.entities.ewer:.4f}")
            for u in report.utterances)
        out.write_text(table + "\n\n" + rows + "\n", encoding="utf-8")
    _emit(args, table, payload)
    return 0


def cmd_inspect_checkpoint(args) -> int:
    ck = ckpt_io.read_checkpoint(args.checkpoint)
    n_params = sum(int(a.size) for a in ck.arrays.values())
    payload = {"stage": ck.stage, "step": ck.step, "config": ck.config, "extra": ck.extra,
               "tensors": {k: list(a.shape) for k, a in ck.arrays.items()}, "n_parameters": n_params}
    lines = [f"{args.checkpoint}: stage {ck.stage}, step {ck.step}, {len(ck.arrays)} tensors, {n_params} parameters"]
    lines += [f"  {k}: {v!r}" for k, v in ck.config.items()]
    _emit(args, "\n".join(lines), payload)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--report-format", choices=("text", "structured"), default="text")

    p = argparse.ArgumentParser(prog="aumol", description="Audio-to-LLM transcription toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("make-toy-data", parents=[common], help="write a synthetic tone-coded corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--seed", type=int)
    s.add_argument("--duration", type=float, default=1.0)
    s.set_defaults(func=cmd_make_toy_data)

    s = sub.add_parser("featurize", parents=[common], help="WAV -> log-Mel feature dump")
    s.add_argument("audio")
    s.add_argument("out")
    s.add_argument("--frames", type=int, default=FULL_SCALE_FRAMES)
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("train", parents=[common], help="run the staged training plan")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (overrides paths.out_dir)")
    s.add_argument("--seed", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--adapter-variant", choices=ADAPTER_VARIANTS)
    s.add_argument("--downsample", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("transcribe", parents=[common], help="greedy transcription from a checkpoint")
    s.add_argument("--checkpoint", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--audio")
    g.add_argument("--manifest")
    s.add_argument("--out", help="hypothesis manifest path (manifest mode)")
    s.set_defaults(func=cmd_transcribe)

    s = sub.add_parser("evaluate", parents=[common], help="WER/EWER of hypotheses against references")
    s.add_argument("reference", help="reference manifest, or a combined {id, ref, hyp, entities} file")
    s.add_argument("hypotheses", nargs="?", help="hypothesis manifest (omit for a combined file)")
    s.add_argument("--out", help="report path (default report.txt, or report.json when structured)")
    s.add_argument("--aggregate", choices=("micro", "macro"), default="micro")
    s.add_argument("--model-name")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("inspect-checkpoint", parents=[common], help="print checkpoint header and tensors")
    s.add_argument("checkpoint")
    s.set_defaults(func=cmd_inspect_checkpoint)
    return p


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AumolError, OSError) as exc:
        print(f"aumol {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
