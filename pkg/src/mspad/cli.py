"""Command-line entry point: ``mspad <subcommand> ...``.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import metrics, protocol
from .data import (MAX_INTENSITY, DatasetError, DatasetManifest, atomic_write_text, load_all,
                   validate_manifest, write_pgm)
from .fusion import FusionWeights, fuse_bands
from .pipelines import METHODS, band_features, fused_features, load_pipeline, make_pipeline
from .synthgen import GenConfig, generate_dataset
from .validation import check_cubes

log = logging.getLogger("mspad")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_override(text: str):
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise UsageError(f"override must look like key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def load_config(path, overrides=()) -> dict:
    cfg = {}
    if path:
        try:
            cfg = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise DatasetError(f"config not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise DatasetError(f"malformed config {path}: {exc}") from None
    for item in overrides:
        keys, value = _parse_override(item)
        node = cfg
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = value
    return cfg


def _generator_config(cfg: dict, seed) -> GenConfig:
    gen = dict(cfg.get("generator", {}))
    if seed is not None:
        gen["seed"] = seed
    return GenConfig.from_json(gen)


def _dump_fused(cubes, records, weights, out_dir):
    out_dir = Path(out_dir)
    for cube, rec in zip(check_cubes(cubes), records):
        fused = fuse_bands(cube, weights)
        write_pgm(out_dir / f"{rec.sample_id}_fused.pgm",
                  np.round(fused * MAX_INTENSITY).astype(np.uint16))


# --- subcommands --------------------------------------------------------------

def cmd_generate(args):
    config = _generator_config(load_config(args.config, args.set), args.seed)
    manifest = generate_dataset(config, args.out)
    print(f"wrote {len(manifest.records)} samples to {args.out}")


def cmd_validate(args):
    report = validate_manifest(DatasetManifest.load(args.manifest))
    print(report)
    return EXIT_OK if report.ok else EXIT_DATA


def cmd_train(args):
    cfg = load_config(args.config, args.set)
    manifest = DatasetManifest.load(args.manifest)
    cubes = load_all(manifest)
    y = np.array([r.species.label for r in manifest.records])
    params = {"C": args.c if args.c is not None else cfg.get("c", 1.0),
              "seed": args.seed if args.seed is not None else 0}
    if args.method == "score_fusion":
        params["normalize_scores"] = args.normalize_scores
    else:
        params["weights"] = FusionWeights.coerce(cfg.get("weights")).tolist()
    est = make_pipeline(args.method, **params).fit(cubes, y)
    atomic_write_text(args.out, est.dumps())
    print(f"trained {args.method} on {len(y)} samples -> {args.out}")


def cmd_score(args):
    try:
        est = load_pipeline(Path(args.model).read_text())
    except FileNotFoundError:
        raise DatasetError(f"model not found: {args.model}") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise DatasetError(f"malformed model file {args.model}: {exc!r}") from None
    manifest = DatasetManifest.load(args.manifest)
    cubes = load_all(manifest)
    scores = est.decision_function(cubes)
    rows = [(r.sample_id, r.species, s) for r, s in zip(manifest.records, scores)]
    metrics.write_scores_csv(args.out, rows)
    if args.dump_fused:
        weights = getattr(est, "weights_", None)
        _dump_fused(cubes, manifest.records, weights, args.dump_fused)
    print(f"scored {len(rows)} samples -> {args.out}")


def _read_scores(path):
    try:
        return metrics.read_scores_csv(path)
    except FileNotFoundError:
        raise DatasetError(f"score file not found: {path}") from None
    except ValueError as exc:
        raise DatasetError(str(exc)) from None


def cmd_evaluate(args):
    _, scores = _read_scores(args.scores)
    report = metrics.evaluate(scores)
    if args.out:
        atomic_write_text(args.out, metrics.report_json(report))
    sys.stdout.write(metrics.format_report(report))


def cmd_det(args):
    _, scores = _read_scores(args.scores)
    text = metrics.format_det_csv(metrics.det_points(scores))
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_protocol(args):
    cfg = load_config(args.config, args.set)
    out = Path(args.out)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    if args.manifest:
        manifest = DatasetManifest.load(args.manifest)
    else:
        gen = _generator_config(cfg, seed)
        log.info("generating dataset (%d subjects, seed %d)", gen.n_subjects, gen.seed)
        manifest = generate_dataset(gen, out / "dataset")

    spec = protocol.PartitionSpec.for_manifest(manifest)
    if cfg.get("partition"):
        spec = protocol.PartitionSpec(**{**spec.to_json(), **cfg["partition"]})
    repeats = args.repeats if args.repeats is not None else int(cfg.get("repeats", 5))
    C = args.c if args.c is not None else float(cfg.get("c", 1.0))
    weights = FusionWeights.coerce(cfg.get("weights"))
    methods = list(METHODS) if args.method == "both" else [args.method]

    cubes = load_all(manifest)
    if args.dump_fused:
        _dump_fused(cubes, manifest.records, weights, out / "fused")
    tables = []
    for method in methods:
        feats = band_features(cubes) if method == "score_fusion" else fused_features(cubes, weights)
        result = protocol.run_protocol(
            manifest, spec, method, repeats, C, seed, jobs=args.jobs,
            normalize_scores=args.normalize_scores, weights=weights, features=feats)
        protocol.write_outputs(result, out)
        tables.append(protocol.report_table(result))
    atomic_write_text(out / "report.txt", "\n".join(tables))
    sys.stdout.write("\n".join(tables))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mspad", description="Multispectral face presentation attack detection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(p, config=True, seed=True):
        if config:
            p.add_argument("--config", help="JSON config file")
            p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                           help="override a config entry (dotted keys, JSON values)")
        if seed:
            p.add_argument("--seed", type=int)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check a dataset manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train a pipeline on every sample of a dataset")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", choices=list(METHODS), default="score_fusion")
    p.add_argument("--c", type=float)
    p.add_argument("--normalize-scores", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a dataset with a trained pipeline")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-fused", metavar="DIR")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="PAD metrics from a score CSV")
    p.add_argument("scores")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("det", help="DET points from a score CSV")
    p.add_argument("scores")
    p.add_argument("--out")
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("protocol", help="leave-one-PAI-out evaluation")
    common(p)
    p.add_argument("--manifest", help="existing dataset (default: generate one under --out)")
    p.add_argument("--method", choices=list(METHODS) + ["both"], default="both")
    p.add_argument("--repeats", type=int)
    p.add_argument("--c", type=float)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--normalize-scores", action="store_true")
    p.add_argument("--dump-fused", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_protocol)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        rc = args.func(args)
    except UsageError as exc:
        print(f"mspad: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, OSError, ValueError, KeyError) as exc:
        print(f"mspad: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK if rc is None else rc


if __name__ == "__main__":
    sys.exit(main())
