"""Command-line pipeline driver.

Every subcommand is a thin wrapper over one library operation: logs go
to stderr, data goes to files or stdout, and failures print exactly one
machine-parseable line "error: <topic>: <message>". Exit codes: 0 ok,
1 runtime failure, 2 bad usage or configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import augmentor, classical, synth
from .audio import WORKING_RATE, WavError, load_utterance, write_wav
from .codec import CodecError, RemoteCodecBackend, ToyCodecBackend
from .embedder import (ToyEmbedderBackend, embed, load_embeddings_bin, load_embeddings_tsv,
                       save_embeddings_bin, save_embeddings_tsv)
from .features import log_mel, write_feature_dump
from .manifests import (ManifestError, UtteranceRecord, load_manifest, save_manifest,
                        validate_records)
from .rt60 import DecayNotFoundError, compare_rt60, emit_rt60_plot, estimate_rt60
from .scoring import (det_curve, eer_chart, evaluate, load_report, load_scores, load_trials,
                      save_scores, score_trials, split_by_label, write_report)

log = logging.getLogger("faraug")

_CLASSICAL_METHODS = ("noise", "rir", "speed", "shuffle")


class ConfigError(ValueError):
    """Bad flags or config file; the message lists every problem found."""


def _one_line(msg) -> str:
    return " ".join(str(msg).split())


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {_one_line(exc)}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cfg


def _cfg_get(cfg: dict, dotted: str, default=None):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def _merge(flag_value, cfg: dict, dotted: str, default=None):
    """Flags override config keys; config overrides built-in defaults."""
    if flag_value is not None:
        return flag_value
    return _cfg_get(cfg, dotted, default)


def _require_files(problems: list[str], kind: str, paths) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            problems.append(f"missing {kind} file: {p}")


def _raise_problems(problems: list[str]) -> None:
    if problems:
        raise ConfigError("; ".join(problems))


def _resolve_seed(args, cfg: dict, problems: list[str]):
    seed = _merge(getattr(args, "seed", None), cfg, "seed")
    if seed is None:
        problems.append("a seed is required (--seed or config key 'seed')")
    return seed


def _resolve_workers(args, cfg: dict, problems: list[str]) -> int:
    value = _merge(getattr(args, "workers", None), cfg, "workers")
    if value is None:
        value = os.environ.get("FARAUG_WORKERS", "1")
    try:
        workers = int(value)
    except (TypeError, ValueError):
        problems.append(f"workers must be an integer, got {value!r}")
        return 1
    if workers < 1:
        problems.append(f"workers must be >= 1, got {workers}")
        return 1
    return workers


def _codec_backend(args, cfg: dict, problems: list[str]):
    name = _merge(getattr(args, "backend", None), cfg, "codec.backend", "toy")
    if name == "toy":
        return ToyCodecBackend()
    if name == "remote":
        url = _merge(getattr(args, "remote_url", None), cfg, "codec.remote_url")
        try:
            return RemoteCodecBackend(url)
        except CodecError as exc:
            problems.append(str(exc))
            return None
    problems.append(f"unknown codec backend {name!r} (expected toy or remote)")
    return None


# ---------------------------------------------------------------- commands

def cmd_manifest_validate(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "manifest", [args.manifest])
    _raise_problems(problems)
    records = load_manifest(args.manifest)
    if args.check_paths:
        missing = validate_records(records, check_paths=True)
        if missing:
            raise ManifestError(f"{args.manifest}: " + "; ".join(missing))
    speakers = {r.speaker_id for r in records}
    print(f"ok: {len(records)} utterances, {len(speakers)} speakers")
    return 0


def cmd_features_extract(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "manifest", [args.manifest])
    _raise_problems(problems)
    records = load_manifest(args.manifest)

    def items():
        for rec in records:
            yield rec.utt_id, log_mel(load_utterance(rec.path), mean_norm=args.mean_norm)

    write_feature_dump(args.out, items())
    log.info("extracted features for %d utterances -> %s", len(records), args.out)
    return 0


def _classical_one(rec, method, w, seed, snr_db, rir_wave, rir_rt60, factor, block_s):
    rng = np.random.default_rng(classical.derive_seed(seed, method, rec.utt_id))
    if method == "noise":
        noise = synth.white_noise(len(w) / w.sample_rate,
                                  seed=classical.derive_seed(seed, "noise-sig", rec.utt_id),
                                  rate=w.sample_rate, amplitude=1.0)
        return classical.add_noise_snr(w, noise, snr_db), rec.speaker_id
    if method == "rir":
        rir = rir_wave
        if rir is None:
            rir = synth.synthetic_rir(rir_rt60, rate=w.sample_rate,
                                      seed=classical.derive_seed(seed, "rir-sig", rec.utt_id))
        return classical.apply_rir(w, rir), rec.speaker_id
    if method == "speed":
        out = classical.speed_perturb(w, factor)
        label = rec.speaker_id if factor == 1.0 else f"{rec.speaker_id}#sp{factor:g}"
        return out, label
    cfg_obj = classical.AugConfig(seed=seed, shuffle_block_s=block_s)
    return classical.shuffle_augment(w, cfg_obj, rng), rec.speaker_id


def cmd_augment_classical(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "manifest", [args.manifest])
    seed = _resolve_seed(args, cfg, problems)
    snr_db = float(_merge(args.snr, cfg, "augment.snr_db", 10.0))
    rir_rt60 = _merge(args.rir_rt60, cfg, "augment.rir_rt60_s")
    factor = _merge(args.factor, cfg, "augment.speed_factor")
    block_s = float(_merge(args.block_s, cfg, "augment.shuffle_block_s", 0.5))
    if args.method == "rir" and args.rir is None and rir_rt60 is None:
        problems.append("method rir needs --rir WAV or --rir-rt60 seconds")
    if args.method == "speed" and factor is None:
        problems.append("method speed needs --factor")
    if args.rir is not None:
        _require_files(problems, "impulse response", [args.rir])
    _raise_problems(problems)

    records = load_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    suffix = f"sp{factor:g}" if args.method == "speed" else args.method
    rir_wave = load_utterance(args.rir) if args.rir is not None else None

    out_records = []
    for rec in records:
        out_id = f"{rec.utt_id}__{suffix}"
        out_path = out_dir / f"{out_id}.wav"
        if args.dry_run:
            print(f"{rec.utt_id} -> {out_path}")
            continue
        w = load_utterance(rec.path)
        out, label = _classical_one(rec, args.method, w, seed, snr_db, rir_wave,
                                    rir_rt60, factor, block_s)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_wav(out, out_path, encoding="float32")
        out_records.append(UtteranceRecord(out_id, label, str(out_path), rec.domain))
    if args.dry_run:
        return 0
    save_manifest(out_records, out_dir / "manifest.tsv")
    log.info("%s-augmented %d utterances -> %s", args.method, len(out_records), out_dir)
    return 0


def cmd_adaptive_plan(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "manifest", [args.far, args.near])
    seed = _resolve_seed(args, cfg, problems)
    k = int(_merge(args.k, cfg, "augment.k_per_near", 5))
    if k < 0:
        problems.append(f"k must be >= 0, got {k}")
    _raise_problems(problems)
    pool = augmentor.build_pool(load_manifest(args.far), load_manifest(args.near))
    plan = augmentor.plan_train_aug(pool, k_per_near=k, seed=seed)
    augmentor.save_plan(plan, args.out)
    log.info("planned %d jobs (%d far x %d near speakers) -> %s",
             len(plan.jobs), len(pool.far_speakers), len(pool.near_speakers), args.out)
    return 0


def cmd_adaptive_run(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "plan", [args.plan])
    _require_files(problems, "manifest", args.manifest or [])
    if not args.manifest:
        problems.append("at least one --manifest with the plan's source utterances is required")
    workers = _resolve_workers(args, cfg, problems)
    backend = _codec_backend(args, cfg, problems)
    _raise_problems(problems)

    plan = augmentor.load_plan(args.plan)
    records = [rec for m in args.manifest for rec in load_manifest(m)]
    if args.dry_run:
        for job in plan.jobs:
            print(f"{job.src_utt_id} + {job.spk_ref_utt_id} -> {job.out_utt_id}"
                  f" [{job.out_speaker_label}]")
        return 0
    manifest, failures = augmentor.execute_plan(plan, records, backend, args.out_dir,
                                                workers=workers)
    save_manifest(manifest, Path(args.out_dir) / "manifest.tsv")
    for failure in failures:
        log.error("job %s failed: %s", failure.out_utt_id, _one_line(failure.error))
    if failures:
        print(f"error: augment-run: {len(failures)}/{len(plan.jobs)} jobs failed",
              file=sys.stderr)
        return 1
    log.info("executed %d jobs -> %s", len(plan.jobs), args.out_dir)
    return 0


def cmd_trials_crossaug(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "trial list", [args.trials])
    _require_files(problems, "manifest", [args.enroll, args.test])
    _raise_problems(problems)
    trials = load_trials(args.trials)
    plan = augmentor.plan_trial_crossaug(trials, load_manifest(args.enroll),
                                         load_manifest(args.test))
    augmentor.save_plan(plan, args.out)
    log.info("planned %d cross-conversion jobs for %d trials -> %s",
             len(plan.jobs), len(trials), args.out)
    return 0


def cmd_embed(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "manifest", [args.manifest])
    name = _merge(args.backend, cfg, "embedder.backend", "toy")
    if name != "toy":
        problems.append(f"unknown embedder backend {name!r} (only toy is built in)")
    _raise_problems(problems)
    backend = ToyEmbedderBackend()
    records = load_manifest(args.manifest)
    embeddings = [embed(backend, load_utterance(rec.path), utt_id=rec.utt_id)
                  for rec in records]
    if args.format == "bin":
        save_embeddings_bin(args.out, embeddings)
    else:
        save_embeddings_tsv(args.out, embeddings)
    log.info("embedded %d utterances -> %s", len(embeddings), args.out)
    return 0


def _load_embeddings_any(path: str) -> dict[str, np.ndarray]:
    if str(path).endswith(".tsv"):
        return load_embeddings_tsv(path)
    return load_embeddings_bin(path)


def cmd_eval_score(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "trial list", [args.trials])
    _require_files(problems, "embedding", [args.embeddings])
    fusion = _merge(args.fusion, cfg, "scoring.fusion", "none")
    if fusion not in ("none", "crossaug_mean"):
        problems.append(f"unknown fusion {fusion!r}")
    _raise_problems(problems)
    trials = load_trials(args.trials)
    embeddings = _load_embeddings_any(args.embeddings)
    include_both = bool(_merge(args.include_both_converted, cfg,
                               "scoring.include_both_converted", False))
    rows = score_trials(trials, embeddings, fusion=fusion,
                        include_both_converted=include_both)
    save_scores(args.out, rows)
    log.info("scored %d trials (fusion=%s) -> %s", len(rows), fusion, args.out)
    return 0


def cmd_eval_metrics(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "score", [args.scores])
    _require_files(problems, "trial list", [args.trials])
    p_target = float(_merge(args.p_target, cfg, "scoring.p_target", 0.01))
    if not 0.0 < p_target < 1.0:
        problems.append(f"p_target must be in (0, 1), got {p_target}")
    _raise_problems(problems)
    trials = load_trials(args.trials)
    rows = load_scores(args.scores)
    target, nontarget = split_by_label(trials, rows)
    report = evaluate(target, nontarget, p_target=p_target)
    write_report(report, args.out)
    if args.det_plot:
        det_curve(target, nontarget, args.det_plot)
    print(f"eer={report.eer:.6f} min_dcf={report.min_dcf:.6f} "
          f"n_target={report.n_target} n_nontarget={report.n_nontarget}")
    return 0


def cmd_rt60_estimate(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "manifest", args.manifest or [])
    if not args.manifest:
        problems.append("at least one --manifest is required")
    _raise_problems(problems)
    rows = []
    labeled = []
    for manifest in args.manifest:
        group = Path(manifest).stem
        for rec in load_manifest(manifest):
            try:
                est = estimate_rt60(load_utterance(rec.path))
            except (DecayNotFoundError, ValueError) as exc:
                log.warning("skipping %s: %s", rec.utt_id, _one_line(exc))
                continue
            rows.append(f"{rec.utt_id}\t{est.rt60_s:.4f}\t{est.confidence:.3f}\t{est.n_segments}")
            labeled.append((group, est))
    if not rows:
        print("error: rt60-estimate: no utterance yielded an estimate", file=sys.stderr)
        return 1
    header = "# utt_id\trt60_s\tconfidence\tn_segments"
    Path(args.out).write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    if args.plot:
        emit_rt60_plot(labeled, args.plot)
    log.info("estimated RT60 for %d utterances -> %s", len(rows), args.out)
    return 0


def cmd_rt60_compare(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "wav", [args.a, args.b, args.c])
    _raise_problems(problems)
    report = compare_rt60(load_utterance(args.a), load_utterance(args.b),
                          load_utterance(args.c))
    payload = json.dumps({"rt60_a": report.rt60_a, "rt60_b": report.rt60_b,
                          "rt60_c": report.rt60_c, "closer_to": report.closer_to},
                         sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    print(payload, end="")
    return 0


def cmd_report_plot(args, cfg) -> int:
    problems: list[str] = []
    _require_files(problems, "report", args.reports)
    _raise_problems(problems)
    pairs = [(Path(p).stem, load_report(p)) for p in args.reports]
    eer_chart(pairs, args.out)
    log.info("plotted %d reports -> %s", len(pairs), args.out)
    return 0


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its keys")
    common.add_argument("--seed", type=int, help="master seed for every random choice")

    parser = argparse.ArgumentParser(prog="faraug",
                                     description="far-field augmentation pipeline")
    sub = parser.add_subparsers(dest="group", required=True)

    man = sub.add_parser("manifest", help="manifest inspection").add_subparsers(
        dest="action", required=True)
    p = man.add_parser("validate", parents=[common])
    p.add_argument("manifest")
    p.add_argument("--check-paths", action="store_true",
                   help="also require every audio file to exist")
    p.set_defaults(func=cmd_manifest_validate)

    feat = sub.add_parser("features", help="feature extraction").add_subparsers(
        dest="action", required=True)
    p = feat.add_parser("extract", parents=[common])
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="binary feature dump path")
    p.add_argument("--mean-norm", action="store_true")
    p.set_defaults(func=cmd_features_extract)

    aug = sub.add_parser("augment", help="augmentation").add_subparsers(
        dest="action", required=True)
    p = aug.add_parser("classical", parents=[common])
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--method", required=True, choices=_CLASSICAL_METHODS)
    p.add_argument("--snr", type=float, help="target SNR in dB (noise method)")
    p.add_argument("--rir", help="impulse-response WAV (rir method)")
    p.add_argument("--rir-rt60", type=float,
                   help="synthesize impulse responses at this RT60 (rir method)")
    p.add_argument("--factor", type=float, help="speed factor (speed method)")
    p.add_argument("--block-s", type=float, help="shuffle block seconds")
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_augment_classical)

    adaptive = aug.add_parser("adaptive").add_subparsers(dest="stage", required=True)
    p = adaptive.add_parser("plan", parents=[common])
    p.add_argument("--far", required=True, help="far-field manifest")
    p.add_argument("--near", required=True, help="near-field manifest")
    p.add_argument("--k", type=int, help="jobs per near speaker")
    p.add_argument("--out", required=True, help="plan file to write")
    p.set_defaults(func=cmd_adaptive_plan)
    p = adaptive.add_parser("run", parents=[common])
    p.add_argument("--plan", required=True)
    p.add_argument("--manifest", action="append",
                   help="manifest holding the plan's utterances (repeatable)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--backend", choices=("toy", "remote"))
    p.add_argument("--remote-url")
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_adaptive_run)

    p = aug.add_parser("trials-crossaug", parents=[common])
    p.add_argument("--trials", required=True)
    p.add_argument("--enroll", required=True, help="enrollment-side manifest")
    p.add_argument("--test", required=True, help="test-side manifest")
    p.add_argument("--out", required=True, help="plan file to write")
    p.set_defaults(func=cmd_trials_crossaug)

    p = sub.add_parser("embed", parents=[common], help="extract speaker embeddings")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("tsv", "bin"), default="tsv")
    p.add_argument("--backend")
    p.set_defaults(func=cmd_embed)

    ev = sub.add_parser("eval", help="trial scoring and metrics").add_subparsers(
        dest="action", required=True)
    p = ev.add_parser("score", parents=[common])
    p.add_argument("--trials", required=True)
    p.add_argument("--embeddings", required=True, help=".tsv or binary dump")
    p.add_argument("--out", required=True)
    p.add_argument("--fusion", choices=("none", "crossaug_mean"))
    p.add_argument("--include-both-converted", action="store_true", default=None)
    p.set_defaults(func=cmd_eval_score)
    p = ev.add_parser("metrics", parents=[common])
    p.add_argument("--scores", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--p-target", type=float)
    p.add_argument("--det-plot", help="also write a DET-curve SVG here")
    p.set_defaults(func=cmd_eval_metrics)

    rt = sub.add_parser("rt60", help="blind reverberation analysis").add_subparsers(
        dest="action", required=True)
    p = rt.add_parser("estimate", parents=[common])
    p.add_argument("--manifest", action="append", help="repeatable; file stem labels the group")
    p.add_argument("--out", required=True, help="per-utterance TSV")
    p.add_argument("--plot", help="scatter SVG path")
    p.set_defaults(func=cmd_rt60_estimate)
    p = rt.add_parser("compare", parents=[common])
    p.add_argument("--a", required=True, help="waveform under test")
    p.add_argument("--b", required=True, help="first anchor")
    p.add_argument("--c", required=True, help="second anchor")
    p.add_argument("--out", help="optional JSON output path")
    p.set_defaults(func=cmd_rt60_compare)

    rep = sub.add_parser("report", help="chart emission").add_subparsers(
        dest="action", required=True)
    p = rep.add_parser("plot", parents=[common])
    p.add_argument("reports", nargs="+", help="evaluation report JSON files")
    p.add_argument("--out", required=True, help="SVG path")
    p.set_defaults(func=cmd_report_plot)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    topic = " ".join(t for t in (getattr(args, "group", None), getattr(args, "action", None),
                                 getattr(args, "stage", None)) if t)
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"error: config: {_one_line(exc)}", file=sys.stderr)
        return 2
    except (ManifestError, WavError, CodecError, ValueError, KeyError, OSError) as exc:
        print(f"error: {topic or 'faraug'}: {_one_line(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
