"""JSON-lines manifests: one ``{id, audio_path, transcript, entities?}`` object per line.

``audio_path`` is resolved relative to the manifest's directory. Hypothesis
manifests use the same layout with ``audio_path`` optional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ContractError


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    transcript: str
    audio_path: str | None = None
    entities: tuple[dict, ...] = field(default=())

    def to_json(self) -> dict:
        out: dict = {"id": self.id}
        if self.audio_path is not None:
            out["audio_path"] = self.audio_path
        out["transcript"] = self.transcript
        if self.entities:
            out["entities"] = [dict(e) for e in self.entities]
        return out


def _entity(raw, where: str) -> dict:
    if not isinstance(raw, dict) or not isinstance(raw.get("text"), str):
        raise ContractError(f"{where}: each entity needs a string 'text'")
    unknown = set(raw) - {"text", "start_token"}
    if unknown:
        raise ContractError(f"{where}: unknown entity keys {sorted(unknown)}")
    start = raw.get("start_token")
    if start is not None and (not isinstance(start, int) or isinstance(start, bool) or start < 0):
        raise ContractError(f"{where}: start_token must be a non-negative integer")
    return dict(raw)


def parse_line(line: str, where: str) -> ManifestRecord:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ContractError(f"{where}: not valid JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise ContractError(f"{where}: expected a JSON object")
    unknown = set(raw) - {"id", "audio_path", "transcript", "entities"}
    if unknown:
        raise ContractError(f"{where}: unknown keys {sorted(unknown)}")
    if not isinstance(raw.get("id"), str) or not raw["id"]:
        raise ContractError(f"{where}: missing string 'id'")
    if not isinstance(raw.get("transcript"), str):
        raise ContractError(f"{where}: missing string 'transcript'")
    audio = raw.get("audio_path")
    if audio is not None and not isinstance(audio, str):
        raise ContractError(f"{where}: 'audio_path' must be a string")
    ents = raw.get("entities", [])
    if not isinstance(ents, list):
        raise ContractError(f"{where}: 'entities' must be a list")
    return ManifestRecord(raw["id"], raw["transcript"], audio, tuple(_entity(e, where) for e in ents))


def parse_manifest(text: str, source: str = "<manifest>") -> list[ManifestRecord]:
    records, seen = [], set()
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        rec = parse_line(line, f"{source}:{lineno}")
        if rec.id in seen:
            raise ContractError(f"{source}:{lineno}: duplicate id {rec.id!r}")
        seen.add(rec.id)
        records.append(rec)
    return records


def serialize_manifest(records: Iterable[ManifestRecord]) -> str:
    return "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in records)


def read_manifest(path: str | Path, require_audio: bool = True) -> list[ManifestRecord]:
    """Load a manifest; with ``require_audio`` every referenced file must exist."""
    path = Path(path)
    records = parse_manifest(path.read_text(encoding="utf-8"), str(path))
    if require_audio:
        for rec in records:
            if rec.audio_path is None:
                raise ContractError(f"{path}: record {rec.id!r} has no audio_path")
            if not audio_file(path, rec).is_file():
                raise ContractError(f"{path}: audio for {rec.id!r} not found at {audio_file(path, rec)}")
    return records


def audio_file(manifest_path: str | Path, rec: ManifestRecord) -> Path:
    return Path(manifest_path).parent / rec.audio_path


def write_manifest(path: str | Path, records: Iterable[ManifestRecord]) -> Path:
    path = Path(path)
    path.write_text(serialize_manifest(records), encoding="utf-8")
    return path


def id_mismatch(ref: Iterable[ManifestRecord], hyp: Iterable[ManifestRecord]) -> tuple[list[str], list[str]]:
    """Ids missing from the hypotheses and extra ids not in the references."""
    ref_ids = [r.id for r in ref]
    hyp_ids = [h.id for h in hyp]
    ref_set, hyp_set = set(ref_ids), set(hyp_ids)
    missing = [i for i in ref_ids if i not in hyp_set]
    extra = [i for i in hyp_ids if i not in ref_set]
    return missing, extra


def parse_eval_records(text: str, source: str = "<records>") -> list:
    """Combined scoring manifest: one ``{id, ref, hyp, entities?}`` object per line."""
    from .metrics.scoring import TranscriptRecord

    records, seen = [], set()
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        where = f"{source}:{lineno}"
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ContractError(f"{where}: not valid JSON ({exc.msg})") from exc
        if not isinstance(raw, dict):
            raise ContractError(f"{where}: expected a JSON object")
        unknown = set(raw) - {"id", "ref", "hyp", "entities"}
        if unknown:
            raise ContractError(f"{where}: unknown keys {sorted(unknown)}")
        for key in ("id", "ref", "hyp"):
            if not isinstance(raw.get(key), str):
                raise ContractError(f"{where}: missing string {key!r}")
        if raw["id"] in seen:
            raise ContractError(f"{where}: duplicate id {raw['id']!r}")
        seen.add(raw["id"])
        ents = raw.get("entities", [])
        if not isinstance(ents, list):
            raise ContractError(f"{where}: 'entities' must be a list")
        ents = [_entity(e, where) for e in ents]
        records.append(TranscriptRecord.from_annotations(raw["id"], raw["ref"], raw["hyp"], ents))
    return records


def read_eval_records(path: str | Path) -> list:
    path = Path(path)
    return parse_eval_records(path.read_text(encoding="utf-8"), str(path))
