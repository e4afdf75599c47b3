"""Corpus manifests: tab-separated utterance lists with speaker and domain tags."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

DOMAINS = ("far", "near")
_COLUMNS = ("utt_id", "speaker_id", "path", "domain")


class ManifestError(ValueError):
    """A manifest violates its format or uniqueness rules."""


@dataclass(frozen=True)
class UtteranceRecord:
    utt_id: str
    speaker_id: str
    path: str
    domain: str


def validate_records(records: Sequence[UtteranceRecord],
                     check_paths: bool = False) -> list[str]:
    """Return every problem found, not just the first."""
    problems = []
    seen: dict[str, int] = {}
    for i, rec in enumerate(records):
        for name in _COLUMNS:
            value = getattr(rec, name)
            if not value:
                problems.append(f"row {i}: empty {name}")
            elif any(c in value for c in "\t\n\r"):
                problems.append(f"row {i}: {name} contains tab or newline")
        if rec.domain and rec.domain not in DOMAINS:
            problems.append(f"row {i}: domain {rec.domain!r} not in {DOMAINS}")
        if rec.utt_id in seen:
            problems.append(
                f"row {i}: duplicate utt_id {rec.utt_id!r} (first seen at row {seen[rec.utt_id]})")
        else:
            seen[rec.utt_id] = i
        if check_paths and rec.path and not Path(rec.path).is_file():
            problems.append(f"row {i}: missing audio file {rec.path}")
    return problems


def load_manifest(path: str | Path) -> list[UtteranceRecord]:
    """Parse a manifest; relative audio paths resolve against its directory."""
    path = Path(path)
    base = path.parent
    records = []
    problems = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != len(_COLUMNS):
            problems.append(f"line {lineno}: expected {len(_COLUMNS)} columns, got {len(fields)}")
            continue
        utt_id, speaker_id, rec_path, domain = (f.strip() for f in fields)
        if rec_path and not Path(rec_path).is_absolute():
            rec_path = str(base / rec_path)
        records.append(UtteranceRecord(utt_id, speaker_id, rec_path, domain))
    problems.extend(validate_records(records))
    if problems:
        raise ManifestError(f"{path}: " + "; ".join(problems))
    return records


def save_manifest(records: Iterable[UtteranceRecord], path: str | Path) -> None:
    path = Path(path)
    records = list(records)
    problems = validate_records(records)
    if problems:
        raise ManifestError("refusing to write invalid manifest: " + "; ".join(problems))
    lines = ["# " + "\t".join(_COLUMNS)]
    for rec in records:
        lines.append("\t".join((rec.utt_id, rec.speaker_id, rec.path, rec.domain)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def records_by_id(records: Iterable[UtteranceRecord]) -> dict[str, UtteranceRecord]:
    out: dict[str, UtteranceRecord] = {}
    for rec in records:
        if rec.utt_id in out and out[rec.utt_id] != rec:
            raise ManifestError(f"conflicting records for utt_id {rec.utt_id!r}")
        out[rec.utt_id] = rec
    return out


def records_by_speaker(records: Iterable[UtteranceRecord]) -> dict[str, list[UtteranceRecord]]:
    out: dict[str, list[UtteranceRecord]] = {}
    for rec in records:
        out.setdefault(rec.speaker_id, []).append(rec)
    return out
