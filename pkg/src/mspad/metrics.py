"""PAD error rates: APCER, BPCER, D-EER, BPCER at fixed APCER and DET points.

A score ``s >= threshold`` is accepted as bonafide everywhere in this module.
Thresholds are swept over midpoints between adjacent distinct pooled scores
plus the two sentinels -inf and +inf, so every achievable (APCER, BPCER)
pair is visited exactly once and nothing is interpolated.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .data import PAISpecies, atomic_write_text


@dataclass(frozen=True, eq=False)
class ScoreSet:
    bonafide_scores: np.ndarray
    attack_scores: np.ndarray
    attack_species: tuple[PAISpecies, ...] | None = None

    def __post_init__(self):
        bona = np.asarray(self.bonafide_scores, dtype=np.float64).ravel()
        att = np.asarray(self.attack_scores, dtype=np.float64).ravel()
        if np.any(np.isnan(bona)) or np.any(np.isnan(att)):
            raise ValueError("scores contain NaN")
        object.__setattr__(self, "bonafide_scores", bona)
        object.__setattr__(self, "attack_scores", att)
        if self.attack_species is not None and len(self.attack_species) != len(att):
            raise ValueError("attack_species must tag every attack score")

    @classmethod
    def from_labels(cls, scores, labels) -> "ScoreSet":
        scores, labels = np.asarray(scores, float), np.asarray(labels)
        return cls(scores[labels > 0], scores[labels < 0])

    def only(self, species: PAISpecies) -> "ScoreSet":
        """Bonafide scores against the attacks of a single species."""
        if self.attack_species is None:
            raise ValueError("attack scores are not tagged by species")
        keep = np.array([s is species for s in self.attack_species], dtype=bool)
        return ScoreSet(self.bonafide_scores, self.attack_scores[keep],
                        tuple(s for s in self.attack_species if s is species))


def _require(values, what):
    if len(values) == 0:
        raise ValueError(f"{what} scores are empty")


def apcer(scores: ScoreSet, threshold: float) -> float:
    _require(scores.attack_scores, "attack")
    return 100.0 * np.count_nonzero(scores.attack_scores >= threshold) / len(scores.attack_scores)


def bpcer(scores: ScoreSet, threshold: float) -> float:
    _require(scores.bonafide_scores, "bonafide")
    return 100.0 * np.count_nonzero(scores.bonafide_scores < threshold) / len(scores.bonafide_scores)


def candidate_thresholds(scores: ScoreSet) -> np.ndarray:
    """Ascending thresholds: -inf, midpoints of distinct pooled scores, +inf."""
    u = np.unique(np.concatenate([scores.bonafide_scores, scores.attack_scores]))
    u = u[np.isfinite(u)]
    mids = u[:-1] + (u[1:] - u[:-1]) / 2
    # adjacent floats: the midpoint may round down onto the lower score
    mids = np.where(mids > u[:-1], mids, u[1:])
    return np.concatenate([[-np.inf], mids, [np.inf]])


def _sweep(scores: ScoreSet):
    """Thresholds with the integer error counts at each of them."""
    _require(scores.bonafide_scores, "bonafide")
    _require(scores.attack_scores, "attack")
    thr = candidate_thresholds(scores)
    att = np.sort(scores.attack_scores)
    bona = np.sort(scores.bonafide_scores)
    n_accepted = len(att) - np.searchsorted(att, thr, side="left")
    n_rejected = np.searchsorted(bona, thr, side="left")
    return thr, n_accepted, n_rejected


def d_eer(scores: ScoreSet) -> tuple[float, float]:
    """(D-EER in percent, threshold) at the point where |APCER - BPCER| is smallest.

    Ties go to the lowest threshold. Rates are compared in exact integer
    arithmetic so float rounding cannot reorder them.
    """
    thr, n_acc, n_rej = _sweep(scores)
    na, nb = len(scores.attack_scores), len(scores.bonafide_scores)
    gap = np.abs(n_acc * nb - n_rej * na)
    k = int(np.argmin(gap))
    # one integer division, so the rate is the correctly rounded exact value
    rate = int(100 * (int(n_acc[k]) * nb + int(n_rej[k]) * na)) / (2 * na * nb)
    return float(rate), float(thr[k])


def bpcer_at_apcer(scores: ScoreSet, alpha: float) -> float:
    """BPCER at the smallest threshold whose APCER does not exceed ``alpha`` percent."""
    if not 0 < alpha < 100:
        raise ValueError(f"alpha must be in (0, 100), got {alpha!r}")
    thr, n_acc, n_rej = _sweep(scores)
    ok = np.flatnonzero(100 * n_acc <= alpha * len(scores.attack_scores))
    if len(ok) == 0:
        return 100.0
    return float(100.0 * n_rej[ok[0]] / len(scores.bonafide_scores))


def det_points(scores: ScoreSet) -> list[tuple[float, float]]:
    """(APCER, BPCER) at every candidate threshold, APCER ascending."""
    thr, n_acc, n_rej = _sweep(scores)
    na, nb = len(scores.attack_scores), len(scores.bonafide_scores)
    return [(100.0 * a / na, 100.0 * r / nb) for a, r in zip(n_acc[::-1], n_rej[::-1])]


@dataclass
class EvalReport:
    d_eer: float
    eer_threshold: float
    bpcer_at_apcer5: float
    bpcer_at_apcer10: float
    det_points: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = asdict(self)
        out["eer_threshold"] = _json_float(self.eer_threshold)
        out["det_points"] = [list(p) for p in self.det_points]
        return out


def _json_float(x):
    if np.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf"


def evaluate(scores: ScoreSet) -> EvalReport:
    eer, thr = d_eer(scores)
    return EvalReport(eer, thr, bpcer_at_apcer(scores, 5.0), bpcer_at_apcer(scores, 10.0),
                      det_points(scores))


def format_report(report: EvalReport) -> str:
    rows = [("D-EER (%)", report.d_eer), ("EER threshold", report.eer_threshold),
            ("BPCER @ APCER=5% (%)", report.bpcer_at_apcer5),
            ("BPCER @ APCER=10% (%)", report.bpcer_at_apcer10)]
    return "\n".join(f"{name:<24}{value:>12.4f}" for name, value in rows) + "\n"


# --- score CSVs ---------------------------------------------------------------

SCORE_COLUMNS = ("sample_id", "species", "score")


def format_scores_csv(rows: Sequence[tuple[str, PAISpecies | str, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORE_COLUMNS)
    for sample_id, species, score in rows:
        sp = species.value if isinstance(species, PAISpecies) else str(species)
        writer.writerow([sample_id, sp, repr(float(score))])
    return buf.getvalue()


def write_scores_csv(path, rows) -> None:
    atomic_write_text(path, format_scores_csv(rows))


def read_scores_csv(path) -> tuple[list[tuple[str, PAISpecies, float]], ScoreSet]:
    """Parse a score CSV; returns the raw rows and the ScoreSet they form."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, skipinitialspace=True)
        if reader.fieldnames is None or not set(SCORE_COLUMNS) <= {f.strip() for f in reader.fieldnames}:
            raise ValueError(f"{path}: expected columns {', '.join(SCORE_COLUMNS)}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            raw = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
            try:
                rows.append((raw["sample_id"], PAISpecies(raw["species"]), float(raw["score"])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    bona = [s for _, sp, s in rows if not sp.is_attack]
    att = [(s, sp) for _, sp, s in rows if sp.is_attack]
    return rows, ScoreSet(bona, [s for s, _ in att], tuple(sp for _, sp in att))


def format_det_csv(points) -> str:
    lines = ["apcer,bpcer"] + [f"{a!r},{b!r}" for a, b in points]
    return "\n".join(lines) + "\n"


def report_json(report: EvalReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
