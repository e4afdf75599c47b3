"""Adaptive augmentation: pair far-field audio with near-field speakers.

Training expansion plans one or more voice conversions per near-field
speaker, each donating its identity to a far-field utterance so the
pseudo data keeps the far-field acoustics but carries a near-field
label. Test-time cross-augmentation converts each trial's enrollment
toward its test speaker and vice versa.

Plans are materialized to disk before execution so a slow neural
backend can process them as a separate batched pass.
"""
from __future__ import annotations

import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .audio import load_utterance, write_wav
from .classical import derive_seed
from .codec import CodecBackend, convert_speaker
from .manifests import ManifestError, UtteranceRecord, records_by_id, records_by_speaker
from .scoring import Trial, crossaug_variant_ids


@dataclass(frozen=True)
class AugJob:
    src_utt_id: str
    spk_ref_utt_id: str
    out_utt_id: str
    out_speaker_label: str


@dataclass
class AugPlan:
    jobs: list[AugJob]
    seed: int


@dataclass
class JobFailure:
    out_utt_id: str
    error: str


@dataclass
class SpeakerPool:
    far_speakers: frozenset[str]
    near_speakers: frozenset[str]
    utterances_by_speaker: dict[str, list[str]]
    records: dict[str, UtteranceRecord]

    @property
    def far_utterances(self) -> list[str]:
        return sorted(u for s in self.far_speakers for u in self.utterances_by_speaker[s])


def build_pool(far: Sequence[UtteranceRecord], near: Sequence[UtteranceRecord]) -> SpeakerPool:
    """Index both manifests; utt_ids must be unique across their union."""
    for name, records, domain in (("far", far, "far"), ("near", near, "near")):
        for rec in records:
            if rec.domain != domain:
                raise ManifestError(
                    f"{name} manifest holds {rec.utt_id!r} with domain {rec.domain!r}")
    counts = Counter(r.utt_id for r in (*far, *near))
    dupes = sorted(u for u, c in counts.items() if c > 1)
    if dupes:
        raise ManifestError(f"duplicate utt_ids across the pool: {dupes[:5]}")
    records = records_by_id(list(far) + list(near))
    by_speaker = {spk: sorted(r.utt_id for r in recs)
                  for spk, recs in records_by_speaker(records.values()).items()}
    return SpeakerPool(
        far_speakers=frozenset(r.speaker_id for r in far),
        near_speakers=frozenset(r.speaker_id for r in near),
        utterances_by_speaker=by_speaker,
        records=records,
    )


def _check_unique_out_ids(jobs: Iterable[AugJob]) -> None:
    seen = set()
    for job in jobs:
        if job.out_utt_id in seen:
            raise ManifestError(f"duplicate out_utt_id {job.out_utt_id!r} in plan")
        seen.add(job.out_utt_id)


def plan_train_aug(pool: SpeakerPool, k_per_near: int = 5, seed: int = 0) -> AugPlan:
    """Select k far-field utterances for every near speaker, seeded.

    Selection is without replacement unless k exceeds the far utterance
    supply. Each job's speaker reference is an independently drawn
    utterance of the target near speaker. Deterministic in (pool, k,
    seed): per-speaker streams make the plan independent of iteration
    or worker order.
    """
    if k_per_near < 0:
        raise ValueError("k_per_near must be >= 0")
    if not pool.far_speakers or not pool.near_speakers:
        raise ValueError("pool needs at least one far and one near speaker")
    far_utts = pool.far_utterances
    if not far_utts:
        raise ValueError("pool has no far-field utterances")
    jobs = []
    for spk in sorted(pool.near_speakers):
        rng = np.random.default_rng(derive_seed(seed, "train-aug", spk))
        replace = k_per_near > len(far_utts)
        src_idx = rng.choice(len(far_utts), size=k_per_near, replace=replace)
        ref_ids = pool.utterances_by_speaker[spk]
        ref_idx = rng.integers(0, len(ref_ids), size=k_per_near)
        for j in range(k_per_near):
            src = far_utts[int(src_idx[j])]
            jobs.append(AugJob(
                src_utt_id=src,
                spk_ref_utt_id=ref_ids[int(ref_idx[j])],
                out_utt_id=f"{src}__{spk}__aug{j:02d}",
                out_speaker_label=spk,
            ))
    _check_unique_out_ids(jobs)
    return AugPlan(jobs=jobs, seed=seed)


def plan_trial_crossaug(trials: Sequence[Trial], enroll: Sequence[UtteranceRecord],
                        test: Sequence[UtteranceRecord]) -> AugPlan:
    """Two conversion jobs per trial: enrollment toward the test speaker
    and test toward the enrollment speaker.

    Output ids carry the (source, reference) pair plus a direction
    suffix; repeated pairs in the same direction are planned once. The
    output label is the identity donor's speaker.
    """
    index = records_by_id(list(enroll) + list(test))
    jobs = []
    seen = set()
    for i, trial in enumerate(trials):
        for utt in (trial.enroll, trial.test):
            if utt not in index:
                raise ManifestError(f"trial {i}: unknown utterance {utt!r}")
        to_test, to_enroll = crossaug_variant_ids(trial)
        for src, ref, out in ((trial.enroll, trial.test, to_test),
                              (trial.test, trial.enroll, to_enroll)):
            if out in seen:
                continue
            seen.add(out)
            jobs.append(AugJob(src_utt_id=src, spk_ref_utt_id=ref, out_utt_id=out,
                               out_speaker_label=index[ref].speaker_id))
    return AugPlan(jobs=jobs, seed=0)


def save_plan(plan: AugPlan, path: str | Path) -> None:
    _check_unique_out_ids(plan.jobs)
    lines = [f"# seed={plan.seed}",
             "# src_utt_id\tspk_ref_utt_id\tout_utt_id\tout_speaker_label"]
    for job in plan.jobs:
        lines.append("\t".join((job.src_utt_id, job.spk_ref_utt_id,
                                job.out_utt_id, job.out_speaker_label)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_plan(path: str | Path) -> AugPlan:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# seed="):
        raise ManifestError(f"{path}: first line must carry '# seed=<int>'")
    try:
        seed = int(lines[0].split("=", 1)[1])
    except ValueError:
        raise ManifestError(f"{path}: malformed seed header {lines[0]!r}") from None
    jobs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ManifestError(f"{path}: line {lineno}: expected 4 columns, got {len(fields)}")
        jobs.append(AugJob(*(f.strip() for f in fields)))
    _check_unique_out_ids(jobs)
    return AugPlan(jobs=jobs, seed=seed)


def execute_plan(plan: AugPlan, records: Sequence[UtteranceRecord] | Mapping[str, UtteranceRecord],
                 backend: CodecBackend, out_dir: str | Path, *, workers: int = 1,
                 overwrite: bool = False) -> tuple[list[UtteranceRecord], list[JobFailure]]:
    """Run every conversion job, returning (manifest records, failures).

    Jobs whose output file already exists are skipped (resume). Job
    failures are collected per job, never fatal to the batch. The
    manifest lists successful jobs in plan order whatever the worker
    count; outputs are float WAVs so reruns are byte-identical.
    """
    index = dict(records) if isinstance(records, Mapping) else records_by_id(records)
    wanted = {j.src_utt_id for j in plan.jobs} | {j.spk_ref_utt_id for j in plan.jobs}
    missing = sorted(wanted - index.keys())
    if missing:
        raise ManifestError(f"plan references unknown utterances: {missing[:5]}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # speaker vectors are tiny and references repeat across jobs
    cache: dict[str, np.ndarray] = {}
    lock = threading.Lock()

    def ref_speaker(path: str) -> np.ndarray:
        with lock:
            vec = cache.get(path)
        if vec is None:
            vec = backend.disentangle(load_utterance(path, backend.sample_rate)).speaker
            with lock:
                cache[path] = vec
        return vec

    def run(job: AugJob) -> UtteranceRecord:
        out_path = out_dir / f"{job.out_utt_id}.wav"
        record = UtteranceRecord(utt_id=job.out_utt_id, speaker_id=job.out_speaker_label,
                                 path=str(out_path), domain="far")
        if out_path.exists() and not overwrite:
            return record
        src = index[job.src_utt_id]
        ref = index[job.spk_ref_utt_id]
        spk = ref_speaker(ref.path)
        factors = backend.disentangle(load_utterance(src.path, backend.sample_rate))
        converted = backend.synthesize(convert_speaker(factors, spk))
        write_wav(converted, out_path, encoding="float32")
        return record

    results: list[UtteranceRecord | None] = [None] * len(plan.jobs)
    failures = []
    if workers <= 1:
        for i, job in enumerate(plan.jobs):
            try:
                results[i] = run(job)
            except Exception as exc:
                failures.append(JobFailure(job.out_utt_id, str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run, job) for job in plan.jobs]
            for i, (job, fut) in enumerate(zip(plan.jobs, futures)):
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    failures.append(JobFailure(job.out_utt_id, str(exc)))
    manifest = [r for r in results if r is not None]
    return manifest, failures
