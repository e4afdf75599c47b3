"""End-to-end pipeline demo on synthetic audio.

Builds a small far-field and near-field corpus, plans and executes
speaker-substitution augmentation with the toy codec, embeds everything,
and scores two trial conditions:

  baseline   far-field enroll vs far-field test
  adaptive   near-field enroll vs pseudo-far outputs carrying the
             matching near-field speaker identity

Every stage goes through the command-line driver, so a run of this
script exercises the same code paths as a shell session would.
"""
import argparse
import itertools
from pathlib import Path
from types import SimpleNamespace

from faraug.cli import main as cli
from faraug.manifests import load_manifest, save_manifest
from faraug.synth import build_corpus


def run_cli(*argv):
    rc = cli([str(a) for a in argv])
    if rc != 0:
        raise SystemExit(rc)


def build_corpora(root: Path, args) -> SimpleNamespace:
    far = build_corpus(root / "far", n_speakers=args.far_speakers,
                       utts_per_speaker=args.utts, domain="far", seed=args.seed,
                       duration_s=args.duration, rir_rt60_s=0.4,
                       speaker_prefix="far")
    near = build_corpus(root / "near", n_speakers=args.near_speakers,
                        utts_per_speaker=args.utts, domain="near",
                        seed=args.seed + 1, duration_s=args.duration,
                        speaker_prefix="near")
    far_tsv, near_tsv = root / "far.tsv", root / "near.tsv"
    save_manifest(far, far_tsv)
    save_manifest(near, near_tsv)
    return SimpleNamespace(far=far, near=near, far_tsv=far_tsv, near_tsv=near_tsv)


def write_trials(path: Path, enroll_records, test_records) -> None:
    lines = []
    for e, t in itertools.product(enroll_records, test_records):
        if e.utt_id == t.utt_id:
            continue
        label = "target" if e.speaker_id == t.speaker_id else "nontarget"
        lines.append(f"{e.utt_id} {t.utt_id} {label}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def score_condition(name: str, work: Path, trials: Path, manifests) -> Path:
    merged = work / f"{name}.tsv"
    records = [r for m in manifests for r in load_manifest(m)]
    save_manifest(records, merged)
    emb = work / f"{name}_emb.tsv"
    scores = work / f"{name}_scores.txt"
    report = work / f"{name}.json"
    run_cli("embed", "--manifest", merged, "--out", emb)
    run_cli("eval", "score", "--trials", trials, "--embeddings", emb,
            "--out", scores)
    run_cli("eval", "metrics", "--scores", scores, "--trials", trials,
            "--out", report, "--det-plot", work / f"{name}_det.svg")
    return report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--seed", type=int, default=17)
    ap.add_argument("--k", type=int, default=2, help="jobs per near speaker")
    ap.add_argument("--far-speakers", type=int, default=3)
    ap.add_argument("--near-speakers", type=int, default=2)
    ap.add_argument("--utts", type=int, default=2)
    ap.add_argument("--duration", type=float, default=0.6)
    args = ap.parse_args(argv)

    work = Path(args.out_dir)
    work.mkdir(parents=True, exist_ok=True)
    corpus = build_corpora(work / "corpus", args)
    run_cli("manifest", "validate", corpus.far_tsv, "--check-paths")
    run_cli("manifest", "validate", corpus.near_tsv, "--check-paths")

    plan = work / "plan.tsv"
    aug_dir = work / "aug"
    run_cli("augment", "adaptive", "plan", "--far", corpus.far_tsv,
            "--near", corpus.near_tsv, "--k", args.k, "--out", plan,
            "--seed", args.seed)
    run_cli("augment", "adaptive", "run", "--plan", plan,
            "--manifest", corpus.far_tsv, "--manifest", corpus.near_tsv,
            "--out-dir", aug_dir)
    aug_records = load_manifest(aug_dir / "manifest.tsv")

    baseline_trials = work / "baseline_trials.txt"
    write_trials(baseline_trials, corpus.far, corpus.far)
    baseline = score_condition("baseline", work, baseline_trials,
                               [corpus.far_tsv])

    adaptive_trials = work / "adaptive_trials.txt"
    write_trials(adaptive_trials, corpus.near, aug_records)
    adaptive = score_condition("adaptive", work, adaptive_trials,
                               [corpus.near_tsv, aug_dir / "manifest.tsv"])

    run_cli("report", "plot", baseline, adaptive, "--out", work / "eer.svg")
    print(f"artifacts under {work}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
