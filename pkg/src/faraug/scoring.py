"""Trial scoring and verification metrics (EER, minDCF, DET curves).

Threshold conventions: a target trial scoring below the threshold is a
miss (FRR counts score < tau); a nontarget scoring at or above it is a
false accept (FAR counts score >= tau, so ties reject). Sweeps evaluate
midpoints between consecutive distinct scores plus sentinels beyond both
extremes, with linear interpolation at the EER crossing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .plots import line_chart

TRIAL_LABELS = ("target", "nontarget", "unknown")

P_TARGET_DEFAULT = 0.01


@dataclass(frozen=True)
class Trial:
    enroll: str
    test: str
    label: str = "unknown"

    def __post_init__(self) -> None:
        if self.label not in TRIAL_LABELS:
            raise ValueError(f"trial label must be one of {TRIAL_LABELS}, got {self.label!r}")


@dataclass
class EvalReport:
    eer: float
    eer_threshold: float
    min_dcf: float
    dcf_threshold: float
    n_target: int
    n_nontarget: int
    p_target: float = P_TARGET_DEFAULT

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def cosine_score(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(a @ b) / (na * nb)


def sweep_thresholds(scores: np.ndarray) -> np.ndarray:
    """Midpoints of consecutive distinct scores plus below/above sentinels."""
    distinct = np.unique(np.asarray(scores, dtype=np.float64))
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate(([distinct[0] - 1.0], mids, [distinct[-1] + 1.0]))


def _error_rates(target: np.ndarray, nontarget: np.ndarray,
                 taus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    tgt = np.sort(np.asarray(target, dtype=np.float64))
    non = np.sort(np.asarray(nontarget, dtype=np.float64))
    frr = np.searchsorted(tgt, taus, side="left") / tgt.size
    far = 1.0 - np.searchsorted(non, taus, side="left") / non.size
    return frr, far


def _check_scores(target, nontarget) -> tuple[np.ndarray, np.ndarray]:
    tgt = np.asarray(target, dtype=np.float64)
    non = np.asarray(nontarget, dtype=np.float64)
    if tgt.size == 0 or non.size == 0:
        raise ValueError("need at least one target and one nontarget score")
    if not (np.all(np.isfinite(tgt)) and np.all(np.isfinite(non))):
        raise ValueError("scores must be finite")
    return tgt, non


def compute_eer(target: Sequence[float], nontarget: Sequence[float]) -> tuple[float, float]:
    """Equal error rate and its threshold.

    FRR rises and FAR falls over the sweep; the EER is read off by linear
    interpolation on the segment where FAR - FRR changes sign.
    """
    tgt, non = _check_scores(target, nontarget)
    taus = sweep_thresholds(np.concatenate([tgt, non]))
    frr, far = _error_rates(tgt, non, taus)
    diff = far - frr
    # sentinels guarantee diff starts at +1 and ends at -1
    i = int(np.flatnonzero(diff >= 0)[-1])
    if i + 1 >= taus.size:
        return float(frr[i]), float(taus[i])
    denom = diff[i] - diff[i + 1]
    frac = 0.0 if denom == 0.0 else diff[i] / denom
    eer = frr[i] + frac * (frr[i + 1] - frr[i])
    tau = taus[i] + frac * (taus[i + 1] - taus[i])
    return float(eer), float(tau)


def compute_min_dcf(target: Sequence[float], nontarget: Sequence[float],
                    p_target: float = P_TARGET_DEFAULT,
                    c_miss: float = 1.0, c_fa: float = 1.0) -> tuple[float, float]:
    """Minimum normalized detection cost over the threshold sweep.

    DCF(tau) = c_miss * p_target * Pmiss + c_fa * (1 - p_target) * Pfa,
    normalized by min(c_miss * p_target, c_fa * (1 - p_target)), so the
    trivial all-accept / all-reject policies cost exactly 1.
    """
    if not 0.0 < p_target < 1.0:
        raise ValueError(f"p_target must be in (0, 1), got {p_target}")
    if c_miss <= 0 or c_fa <= 0:
        raise ValueError("costs must be positive")
    tgt, non = _check_scores(target, nontarget)
    taus = sweep_thresholds(np.concatenate([tgt, non]))
    frr, far = _error_rates(tgt, non, taus)
    dcf = c_miss * p_target * frr + c_fa * (1.0 - p_target) * far
    dcf = dcf / min(c_miss * p_target, c_fa * (1.0 - p_target))
    i = int(np.argmin(dcf))
    return float(dcf[i]), float(taus[i])


def evaluate(target: Sequence[float], nontarget: Sequence[float],
             p_target: float = P_TARGET_DEFAULT) -> EvalReport:
    eer, eer_tau = compute_eer(target, nontarget)
    dcf, dcf_tau = compute_min_dcf(target, nontarget, p_target=p_target)
    return EvalReport(eer=eer, eer_threshold=eer_tau, min_dcf=dcf,
                      dcf_threshold=dcf_tau, n_target=len(np.atleast_1d(target)),
                      n_nontarget=len(np.atleast_1d(nontarget)), p_target=p_target)


# ---------------------------------------------------------------------------
# Trial files, score files, fusion.


def load_trials(path: str | Path) -> list[Trial]:
    trials = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) == 2:
            trials.append(Trial(parts[0], parts[1]))
        elif len(parts) == 3:
            trials.append(Trial(parts[0], parts[1], parts[2]))
        else:
            raise ValueError(f"{path}: bad trial line {raw!r}")
    if not trials:
        raise ValueError(f"{path}: no trials")
    return trials


def save_scores(path: str | Path, rows: Sequence[tuple[str, str, float]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for enroll, test, score in rows:
            fh.write(f"{enroll} {test} {score:.6f}\n")


def load_scores(path: str | Path) -> list[tuple[str, str, float]]:
    rows = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        enroll, test, score = line.split()
        rows.append((enroll, test, float(score)))
    return rows


def crossaug_variant_ids(trial: Trial) -> tuple[str, str]:
    """Ids of the converted enrollment and test for a trial pair."""
    to_test = f"{trial.enroll}__{trial.test}__to_test"
    to_enroll = f"{trial.test}__{trial.enroll}__to_enroll"
    return to_test, to_enroll


def score_trials(trials: Sequence[Trial], embeddings: Mapping[str, np.ndarray],
                 fusion: str = "none",
                 include_both_converted: bool = False) -> list[tuple[str, str, float]]:
    """Cosine-score trials, optionally fusing conversion-augmented pairs.

    fusion "none" scores cos(E(e), E(x)). "crossaug_mean" averages that
    with cos(E(e'), E(x)) and cos(E(e), E(x')), where e' is the enrollment
    converted toward the test speaker and x' the reverse; the optional
    fourth term cos(E(e'), E(x')) is off by default.
    """
    if fusion not in ("none", "crossaug_mean"):
        raise ValueError(f"unknown fusion {fusion!r}")
    rows = []
    for trial in trials:
        try:
            e = embeddings[trial.enroll]
            x = embeddings[trial.test]
        except KeyError as exc:
            raise KeyError(f"trial references unknown utterance {exc}") from exc
        terms = [cosine_score(e, x)]
        if fusion == "crossaug_mean":
            to_test, to_enroll = crossaug_variant_ids(trial)
            try:
                e_conv = embeddings[to_test]
                x_conv = embeddings[to_enroll]
            except KeyError as exc:
                raise KeyError(
                    f"crossaug fusion needs converted-variant embeddings, missing {exc}"
                ) from exc
            terms.append(cosine_score(e_conv, x))
            terms.append(cosine_score(e, x_conv))
            if include_both_converted:
                terms.append(cosine_score(e_conv, x_conv))
        # mean formed around the base term so that variants scoring
        # identically to it leave the score bit-exact
        base = terms[0]
        fused = base + math.fsum(t - base for t in terms[1:]) / len(terms)
        rows.append((trial.enroll, trial.test, float(fused)))
    return rows


def split_by_label(trials: Sequence[Trial],
                   rows: Sequence[tuple[str, str, float]]) -> tuple[np.ndarray, np.ndarray]:
    """Partition scores into (target, nontarget) arrays using trial labels.

    Rows whose trial is labeled "unknown" carry no ground truth and are
    dropped; rows with no matching trial at all are an error.
    """
    labels = {(t.enroll, t.test): t.label for t in trials}
    target, nontarget = [], []
    for enroll, test, score in rows:
        label = labels.get((enroll, test))
        if label is None:
            raise ValueError(f"score row ({enroll}, {test}) has no matching trial")
        if label == "target":
            target.append(score)
        elif label == "nontarget":
            nontarget.append(score)
    return np.array(target), np.array(nontarget)


# ---------------------------------------------------------------------------
# Report emission.


def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(report.to_json(), encoding="utf-8")


def load_report(path: str | Path) -> EvalReport:
    return EvalReport(**json.loads(Path(path).read_text(encoding="utf-8")))


def eer_chart(reports: Sequence[tuple[str, EvalReport]], path: str | Path) -> None:
    """Line chart of EER (%) across named configurations."""
    if not reports:
        raise ValueError("need at least one report to chart")
    xs = list(range(len(reports)))
    ys = [100.0 * r.eer for _, r in reports]
    line_chart([("EER", xs, ys)], path, title="equal error rate by configuration",
               x_label=" / ".join(name for name, _ in reports), y_label="EER (%)")


def _probit(p: np.ndarray) -> np.ndarray:
    from scipy.stats import norm

    return norm.ppf(np.clip(p, 1e-6, 1.0 - 1e-6))


def det_curve(target: Sequence[float], nontarget: Sequence[float],
              path: str | Path, name: str = "system") -> None:
    """DET curve (probit-warped miss vs false-accept rates)."""
    tgt, non = _check_scores(target, nontarget)
    taus = sweep_thresholds(np.concatenate([tgt, non]))
    frr, far = _error_rates(tgt, non, taus)
    xs = _probit(far)
    ys = _probit(frr)
    line_chart([(name, list(xs), list(ys))], path, title="DET curve",
               x_label="false accept rate (probit)", y_label="miss rate (probit)")
