"""Leave-one-PAI-out evaluation.

For every attack species held out in turn:

* train on bonafide plus every species of the two other attack groups;
* the development set adds the held-out species to those, and its D-EER
  threshold is frozen;
* the test set holds bonafide and the held-out species only.

The sibling species of the held-out group (e.g. PrintArtifact2 when
PrintArtifact1 is held out) is left out of all three partitions. Splits are
sample-disjoint, not subject-disjoint, so a subject's face can appear in more
than one partition.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .data import (DatasetError, DatasetManifest, PAIGroup, PAISpecies, SampleRecord,
                   atomic_write_text, load_all)
from .fusion import FusionWeights
from .pipelines import METHODS, band_features, fused_features, make_pipeline

# reference allocation: 1450 bonafide split 500/300/650, 870
# samples per print/display species split 300/180/390
BONAFIDE_SPLIT = (500, 300, 650)
ATTACK_SPLIT = (300, 180, 390)
MASK_SPLIT = (3, 2, 5)

RUN_METRICS = ("dev_deer", "test_deer", "test_bpcer5", "test_bpcer10",
               "test_apcer_at_dev_threshold", "test_bpcer_at_dev_threshold")


def _split_counts(total: int, ratios) -> tuple[int, int, int]:
    s = sum(ratios)
    a = int(total * ratios[0] / s)
    b = int(total * ratios[1] / s)
    return a, b, total - a - b


@dataclass(frozen=True)
class PartitionSpec:
    train_bonafide: int
    dev_bonafide: int
    test_bonafide: int
    train_per_attack: int
    dev_per_attack: int
    test_per_attack: int
    train_per_mask: int
    dev_per_mask: int
    test_per_mask: int
    seed: int = 0

    @classmethod
    def for_manifest(cls, manifest: DatasetManifest, seed: int = 0) -> "PartitionSpec":
        """Scale the reference allocation to the smallest cell of each kind in ``manifest``."""
        counts = {s: 0 for s in PAISpecies}
        for r in manifest.records:
            counts[r.species] += 1
        n_attack = min(counts[s] for s in PAISpecies.attacks() if s.group is not PAIGroup.MASK)
        n_mask = min(counts[s] for s in PAISpecies.of_group(PAIGroup.MASK))
        return cls(*_split_counts(counts[PAISpecies.BONAFIDE], BONAFIDE_SPLIT),
                   *_split_counts(n_attack, ATTACK_SPLIT),
                   *_split_counts(n_mask, MASK_SPLIT), seed=seed)

    def counts(self, species: PAISpecies) -> tuple[int, int, int]:
        if species is PAISpecies.BONAFIDE:
            return self.train_bonafide, self.dev_bonafide, self.test_bonafide
        if species.group is PAIGroup.MASK:
            return self.train_per_mask, self.dev_per_mask, self.test_per_mask
        return self.train_per_attack, self.dev_per_attack, self.test_per_attack

    def to_json(self) -> dict:
        return asdict(self)


def _species_rng(seed: int, species: PAISpecies) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 7, species.code]))


def make_partitions(manifest: DatasetManifest, spec: PartitionSpec, held_out: PAISpecies):
    """Return disjoint (train, dev, test) lists of :class:`SampleRecord`."""
    if not held_out.is_attack:
        raise ValueError("held_out must be an attack species")
    by_species: dict[PAISpecies, list[SampleRecord]] = {s: [] for s in PAISpecies}
    for rec in manifest.records:
        by_species[rec.species].append(rec)

    train, dev, test = [], [], []
    shortages = []
    for species in PAISpecies:
        n_train, n_dev, n_test = spec.counts(species)
        if species is held_out:
            n_train = 0
        elif species.is_attack and species.group is held_out.group:
            continue
        elif species.is_attack:
            n_test = 0
        pool = by_species[species]
        need = n_train + n_dev + n_test
        if need > len(pool):
            shortages.append(f"{species.value}: need {need}, have {len(pool)}")
            continue
        order = _species_rng(spec.seed, species).permutation(len(pool))
        picked = [pool[i] for i in order[:need]]
        train += picked[:n_train]
        dev += picked[n_train:n_train + n_dev]
        test += picked[n_train + n_dev:]
    if shortages:
        raise DatasetError("insufficient samples: " + "; ".join(shortages))
    return train, dev, test


def run_seed(base_seed: int, species: PAISpecies, repeat: int) -> int:
    return int(np.random.SeedSequence([int(base_seed) & 0xFFFFFFFF, species.code, repeat])
               .generate_state(1)[0])


@dataclass
class RunResult:
    held_out: PAISpecies
    repeat_index: int
    seed: int
    dev_deer: float
    dev_threshold: float
    test_deer: float
    test_bpcer5: float
    test_bpcer10: float
    test_threshold: float
    test_apcer_at_dev_threshold: float
    test_bpcer_at_dev_threshold: float
    dev_scores: list = field(default_factory=list, repr=False)
    test_scores: list = field(default_factory=list, repr=False)

    def row(self) -> dict:
        out = {"held_out": self.held_out.value, "repeat": self.repeat_index, "seed": self.seed}
        for name in ("dev_deer", "dev_threshold", "test_deer", "test_threshold") + RUN_METRICS[2:]:
            out[name] = getattr(self, name)
        return out


@dataclass
class ProtocolResult:
    method: str
    runs: list[RunResult]
    partition: PartitionSpec
    params: dict

    def aggregate(self) -> dict[PAISpecies, dict[str, tuple[float, float]]]:
        """(mean, population std) of every run metric per held-out species."""
        out = {}
        for species in PAISpecies.attacks():
            runs = [r for r in self.runs if r.held_out is species]
            if not runs:
                continue
            out[species] = {}
            for name in RUN_METRICS:
                vals = np.array([getattr(r, name) for r in runs], dtype=np.float64)
                out[species][name] = (float(vals.mean()), float(vals.std()))
        return out


# --- execution ---------------------------------------------------------------

_WORKER: dict = {}


def _init_worker(state):
    _WORKER.clear()
    _WORKER.update(state)


def _execute(task) -> RunResult:
    species, repeat = task
    st = _WORKER
    manifest, spec, method = st["manifest"], st["spec"], st["method"]
    seed = run_seed(st["base_seed"], species, repeat)
    part_spec = PartitionSpec(**{**spec.to_json(), "seed": seed})
    train, dev, test = make_partitions(manifest, part_spec, species)
    index, F, y = st["index"], st["features"], st["labels"]
    tr = [index[r.key] for r in train]
    dv = [index[r.key] for r in dev]
    te = [index[r.key] for r in test]

    est = make_pipeline(method, **st["params"], seed=seed)
    est.fit_features(F[tr], y[tr])
    if st["params"].get("normalize_scores"):
        est.calibrate_features(F[dv])
    dev_s = est.decision_function_features(F[dv])
    test_s = est.decision_function_features(F[te])

    dev_set = metrics.ScoreSet.from_labels(dev_s, y[dv])
    test_set = metrics.ScoreSet.from_labels(test_s, y[te])
    dev_eer, dev_thr = metrics.d_eer(dev_set)
    est.set_threshold(dev_thr)
    test_eer, test_thr = metrics.d_eer(test_set)
    return RunResult(
        species, repeat, seed, dev_eer, dev_thr, test_eer,
        metrics.bpcer_at_apcer(test_set, 5.0), metrics.bpcer_at_apcer(test_set, 10.0), test_thr,
        metrics.apcer(test_set, est.threshold_), metrics.bpcer(test_set, est.threshold_),
        dev_scores=[(r.sample_id, r.species, float(s)) for r, s in zip(dev, dev_s)],
        test_scores=[(r.sample_id, r.species, float(s)) for r, s in zip(test, test_s)],
    )


def compute_features(manifest: DatasetManifest, method: str, weights=None) -> np.ndarray:
    cubes = load_all(manifest)
    if method == "score_fusion":
        return band_features(cubes)
    return fused_features(cubes, weights)


def run_protocol(manifest: DatasetManifest, spec: PartitionSpec | None = None,
                 method: str = "score_fusion", repeats: int = 5, C: float = 1.0,
                 base_seed: int = 0, jobs: int = 1, normalize_scores: bool = False,
                 weights=None, features: np.ndarray | None = None,
                 held_out: list[PAISpecies] | None = None) -> ProtocolResult:
    """Train/threshold/test for every held-out species and repeat."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    spec = spec or PartitionSpec.for_manifest(manifest)
    params = {"C": C}
    if method == "score_fusion":
        params["normalize_scores"] = normalize_scores
    else:
        params["weights"] = FusionWeights.coerce(weights).tolist()
    if features is None:
        features = compute_features(manifest, method, weights)
    state = {
        "manifest": manifest, "spec": spec, "method": method, "base_seed": base_seed,
        "params": params, "features": features,
        "labels": np.array([r.species.label for r in manifest.records]),
        "index": {r.key: i for i, r in enumerate(manifest.records)},
    }
    species_list = held_out or PAISpecies.attacks()
    tasks = [(s, k) for s in species_list for k in range(repeats)]
    if jobs <= 1:
        _init_worker(state)
        runs = [_execute(t) for t in tasks]
    else:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(state,)) as pool:
            runs = list(pool.map(_execute, tasks))
    runs.sort(key=lambda r: (r.held_out.code, r.repeat_index))
    return ProtocolResult(method, runs, spec,
                          {**params, "repeats": repeats, "base_seed": base_seed})


# --- reporting ---------------------------------------------------------------

def _finite(x):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def runs_csv(result: ProtocolResult) -> str:
    buf = io.StringIO()
    rows = [r.row() for r in result.runs]
    fields = list(rows[0]) if rows else ["held_out"]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def report_dict(result: ProtocolResult) -> dict:
    agg = result.aggregate()
    return {
        "method": result.method,
        "params": result.params,
        "partition": result.partition.to_json(),
        "aggregate": {
            s.value: {name: {"mean": m, "std": sd} for name, (m, sd) in stats.items()}
            for s, stats in agg.items()
        },
        "runs": [{k: _finite(v) if isinstance(v, float) else v for k, v in r.row().items()}
                 for r in result.runs],
    }


TRAINING_GROUPS = {
    PAIGroup.PRINT: "Display + Mask",
    PAIGroup.DISPLAY: "Print + Mask",
    PAIGroup.MASK: "Display + Print",
}


def report_table(result: ProtocolResult) -> str:
    """Aligned text view: one row per held-out species, mean+-std per column."""
    agg = result.aggregate()
    cols = [("Dev D-EER", "dev_deer"), ("Test D-EER", "test_deer"),
            ("BPCER@APCER=5%", "test_bpcer5"), ("BPCER@APCER=10%", "test_bpcer10"),
            ("BPCER@dev thr", "test_bpcer_at_dev_threshold")]
    header = ["Training PAIs", "Testing PAI"] + [c for c, _ in cols]
    body = []
    for species, stats in agg.items():
        body.append([TRAINING_GROUPS[species.group], species.value]
                    + [f"{stats[key][0]:.2f}±{stats[key][1]:.2f}" for _, key in cols])
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = [f"method: {result.method}"]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in body]
    return "\n".join(lines) + "\n"


def write_outputs(result: ProtocolResult, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    prefix = result.method
    paths = {
        "json": out_dir / f"{prefix}_report.json",
        "table": out_dir / f"{prefix}_report.txt",
        "runs": out_dir / f"{prefix}_runs.csv",
    }
    atomic_write_text(paths["json"], json.dumps(report_dict(result), indent=1, sort_keys=True) + "\n")
    atomic_write_text(paths["table"], report_table(result))
    atomic_write_text(paths["runs"], runs_csv(result))
    score_dir = out_dir / "scores"
    for r in result.runs:
        stem = f"{prefix}_{r.held_out.value}_r{r.repeat_index}"
        metrics.write_scores_csv(score_dir / f"{stem}_dev.csv", r.dev_scores)
        metrics.write_scores_csv(score_dir / f"{stem}_test.csv", r.test_scores)
    return paths
