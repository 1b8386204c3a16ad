"""Command-line pipeline driver.

Commands: validate, codebook, features, sweep, stability, atlas.  All
randomness flows from --seed (default 42); PHASEC_MAX_TRIALS,
PHASEC_K_LIST, and PHASEC_BOOTSTRAP_REPS are honored with CLI flags
taking precedence.  Exit codes: 0 success, 1 runtime failure, 2
configuration error.  Progress goes to stderr; stdout carries summaries.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path


from . import atlas as atlas_mod
from . import codebook as cb
from . import corpus as cio
from . import features as ft
from . import sweep as sw
from .projection import ProjectionSpec

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

K_BOUNDS = (2, 15)


class ConfigError(ValueError):
    """Invalid flags, config file, or environment settings."""


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def parse_k_list(text: str) -> tuple[int, ...]:
    """Accept '2..15' ranges or '2,3,5' lists."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            values = tuple(range(int(lo), int(hi) + 1))
        else:
            values = tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse k list {text!r}") from exc
    if not values:
        raise ConfigError("empty k list")
    return values


def _check_k_bounds(k_list, allow_extended: bool) -> None:
    lo, hi = K_BOUNDS
    if not allow_extended and any(k < lo or k > hi for k in k_list):
        raise ConfigError(
            f"k list outside [{lo}, {hi}] requires --allow-extended-k")


def _load_inputs(args):
    corpus = cio.load_corpus(args.corpus, expected_axes=args.axes)
    table = cio.load_embedding_table(args.table)
    return corpus, table


def _codebook_for(args, corpus, table, out_dir: Path, seed: int) -> cb.Codebook:
    """Load a serialized codebook or build one and persist it."""
    if args.codebook:
        return cb.load_codebook(args.codebook)
    _log("building codebook (no --codebook given) ...")
    config = cb.CodebookConfig(seed=seed)
    book = cb.build_codebook(table, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    cb.save_codebook(book, out_dir / "codebook.json", out_dir / "codebook.axem")
    _log(f"codebook built: K_c={book.k}, retained_dim={book.retained_dim}")
    return book


def _sweep_config(args) -> sw.SweepConfig:
    """defaults < config file < environment < CLI flags."""
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                config = sw.SweepConfig.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad sweep config {args.config}: {exc}") from exc
    else:
        config = sw.SweepConfig()

    env = {}
    if os.environ.get("PHASEC_MAX_TRIALS"):
        env["max_trials"] = int(os.environ["PHASEC_MAX_TRIALS"])
    if os.environ.get("PHASEC_K_LIST"):
        raw = os.environ["PHASEC_K_LIST"].strip().strip("[]")
        env["k_list"] = parse_k_list(raw)
    if os.environ.get("PHASEC_BOOTSTRAP_REPS"):
        env["stability_reps"] = int(os.environ["PHASEC_BOOTSTRAP_REPS"])
    if env:
        config = replace(config, **env)

    overrides = {}
    if args.max_trials is not None:
        overrides["max_trials"] = args.max_trials
    if args.k_list is not None:
        overrides["k_list"] = parse_k_list(args.k_list)
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        overrides["stability_reps"] = args.reps
    if args.allow_missing:
        overrides["allow_missing"] = True
    if overrides:
        config = replace(config, **overrides)
    _check_k_bounds(config.k_list, args.allow_extended_k)
    return config


# -- commands ------------------------------------------------------------------

def cmd_validate(args) -> int:
    corpus, table = _load_inputs(args)
    report = cio.validate_against(corpus, table)
    summary = {
        "works": len(corpus.works),
        "artists": len(corpus.artists),
        "axes": len(corpus.axes),
        "distinct_keywords": len(corpus.vocabulary()),
        "assignments": report.assignments,
        "missing": list(report.missing),
        "unused": list(report.unused),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    if report.missing and not args.allow_missing:
        _log(f"{len(report.missing)} corpus keywords missing from the table")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_codebook(args) -> int:
    corpus, table = _load_inputs(args)
    cio.require_coverage(corpus, table, allow_missing=args.allow_missing)
    ladder = (tuple(int(v) for v in args.ladder.split(","))
              if args.ladder else cb.DEFAULT_LADDER)
    config = cb.CodebookConfig(
        variance_target=args.variance_target, candidate_ladder=ladder,
        kmeans_mode=args.kmeans_mode, minibatch_size=args.minibatch_size,
        seed=args.seed)
    _log(f"building codebook over {len(table.entries)} keywords ...")
    book = cb.build_codebook(table, config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cb.save_codebook(book, out / "codebook.json", out / "codebook.axem")
    with open(out / "codebook_diagnostics.csv", "w", encoding="utf-8") as fh:
        fh.write("k,silhouette,r_singleton,r_empty,gini,adjusted\n")
        for d in book.diagnostics:
            fh.write(f"{d.k},{d.silhouette!r},{d.r_singleton!r},{d.r_empty!r},"
                     f"{d.gini!r},{d.adjusted!r}\n")
    print(json.dumps({"selected_k": book.k, "retained_dim": book.retained_dim,
                      "variance_captured": book.whitener.variance_captured,
                      "candidates": [d.k for d in book.diagnostics],
                      "seed": config.seed}, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_features(args) -> int:
    corpus, table = _load_inputs(args)
    cio.require_coverage(corpus, table, allow_missing=args.allow_missing)
    book = cb.load_codebook(args.codebook)
    variant = ft.FeatureVariant(
        kind=args.variant, svd_dim=args.svd_dim,
        l2_normalized=not args.no_l2,
        l2_scope="axis" if args.per_axis_norm else "row")
    fm = ft.build_features(corpus, book, table, variant,
                           allow_missing=args.allow_missing)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = variant.key()
    ft.save_features(fm, out / f"features-{stem}.json", out / f"features-{stem}.axem",
                     provenance={"seed": args.seed, "variant": variant.to_dict()})
    ft.export_features_csv(fm, out / f"features-{stem}.csv")
    print(json.dumps({"variant": variant.key(), "rows": len(fm.row_ids),
                      "columns": len(fm.columns), "fingerprint": fm.fingerprint(),
                      "seed": args.seed}, indent=2, sort_keys=True))
    return EXIT_OK


def _progress(done: int, total: int) -> None:
    if done == total or done % 25 == 0:
        _log(f"  trial {done}/{total}")


def cmd_sweep(args) -> int:
    config = _sweep_config(args)
    corpus, table = _load_inputs(args)
    cio.require_coverage(corpus, table, allow_missing=config.allow_missing)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    book = _codebook_for(args, corpus, table, out, config.base_seed)

    _log(f"effective sweep config: {json.dumps(config.to_dict(), sort_keys=True)}")
    cache = sw.PipelineCache(corpus, book, table, allow_missing=config.allow_missing)
    report = sw.run_sweep(config, corpus, book, table, jobs=args.jobs,
                          cache=cache, progress=_progress)
    sw.save_report_json(report, out / "sweep_report.json")
    sw.save_report_csv(report, out / "sweep_summary.csv")

    print(sw.format_best_table(report))
    headline = report.headline_result
    if headline is not None:
        spec = headline.spec
        print(f"\nheadline: trial {spec.trial_id} "
              f"[{spec.feature_variant.key()} | {spec.projection_spec.key()} | "
              f"{spec.clustering_spec.key()}] "
              f"silhouette={headline.metrics.silhouette:.3f}")
    if args.with_stability and headline is not None:
        _log("running stability on the headline configuration ...")
        stab = sw.stability(headline.spec, cache, config)
        payload = {"trial": headline.spec.to_dict(), "stability": stab.to_dict(),
                   "config": config.to_dict()}
        with open(out / "stability.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _log(f"reports written to {out}")
    return EXIT_OK


def _trial_from_report(args, report_path) -> sw.TrialSpec:
    with open(report_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    trial_id = args.trial_id if args.trial_id is not None else doc.get("headline")
    if trial_id is None:
        raise ConfigError("report has no headline; pass --trial-id")
    for rec in doc["trials"]:
        if rec["trial_id"] == trial_id:
            return sw.TrialSpec.from_dict(rec)
    raise ConfigError(f"trial {trial_id} not in report {report_path}")


def cmd_stability(args) -> int:
    config = _sweep_config(args)
    corpus, table = _load_inputs(args)
    cio.require_coverage(corpus, table, allow_missing=config.allow_missing)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    book = _codebook_for(args, corpus, table, out, config.base_seed)
    spec = _trial_from_report(args, args.report)
    cache = sw.PipelineCache(corpus, book, table, allow_missing=config.allow_missing)
    stab = sw.stability(spec, cache, config)
    payload = {"trial": spec.to_dict(), "stability": stab.to_dict(),
               "config": config.to_dict()}
    with open(out / "stability.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(payload["stability"], indent=2, sort_keys=True))
    return EXIT_OK


def cmd_atlas(args) -> int:
    config = _sweep_config(args)
    corpus, table = _load_inputs(args)
    cio.require_coverage(corpus, table, allow_missing=config.allow_missing)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    book = _codebook_for(args, corpus, table, out, config.base_seed)
    spec = _trial_from_report(args, args.report)
    cache = sw.PipelineCache(corpus, book, table, allow_missing=config.allow_missing)
    result = sw.run_trial(spec, cache, config)
    if not result.ok:
        _log(f"trial {spec.trial_id} failed: {result.error}")
        return EXIT_RUNTIME

    alt_labels = None
    if args.alt_trial_id is not None:
        alt_spec = _trial_from_report(
            argparse.Namespace(trial_id=args.alt_trial_id), args.report)
        alt = sw.run_trial(alt_spec, cache, config)
        if not alt.ok:
            _log(f"alt trial {alt_spec.trial_id} failed: {alt.error}")
            return EXIT_RUNTIME
        alt_labels = alt.labels

    fm = cache.features(spec.feature_variant)
    space = cache.projection(spec.feature_variant, spec.projection_spec)
    doc = atlas_mod.build_atlas(
        corpus, space, result.labels, book, fm, k=args.k,
        provenance={"trial": spec.to_dict(), "seed": config.base_seed,
                    "config": config.to_dict()},
        alt_labels=alt_labels)
    atlas_mod.save_atlas(doc, out / "atlas.json")
    if args.html:
        atlas_mod.export_html(doc, out / "atlas.html")
    print(json.dumps({"works": len(doc["works"]),
                      "clusters": sum(1 for c in doc["clusters"] if c["id"] >= 0),
                      "mutual_pairs": len(doc["mutual_pairs"]),
                      "out": str(out / "atlas.json")}, indent=2, sort_keys=True))
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _add_common(p, table=True):
    p.add_argument("--corpus", required=True, help="corpus annotation JSON")
    if table:
        p.add_argument("--table", required=True, help="keyword embedding table")
    p.add_argument("--axes", type=int, default=None,
                   help="require exactly this many axes (released dataset: 13)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--allow-missing", action="store_true",
                   help="skip corpus keywords absent from the table")
    p.add_argument("--out-dir", default="out")


def _add_sweep_knobs(p):
    p.add_argument("--config", default=None, help="sweep config JSON")
    p.add_argument("--codebook", default=None, help="path to codebook.json")
    p.add_argument("--max-trials", type=int, default=None)
    p.add_argument("--k-list", default=None, help="e.g. 2..15 or 2,4,8")
    p.add_argument("--allow-extended-k", action="store_true",
                   help="permit K outside [2, 15]")
    p.add_argument("--jobs", type=int, default=1,
                   help="trial worker threads (never changes results)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="axis-atlas",
        description="Axis-aware cultural atlas pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check corpus/table coverage")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("codebook", help="build the concept codebook")
    _add_common(p)
    p.add_argument("--variance-target", type=float, default=0.95)
    p.add_argument("--kmeans-mode", choices=("full", "minibatch"), default="minibatch")
    p.add_argument("--minibatch-size", type=int, default=1024)
    p.add_argument("--ladder", default=None, help="comma-separated candidate sizes")
    p.set_defaults(func=cmd_codebook)

    p = sub.add_parser("features", help="build one feature representation")
    _add_common(p)
    p.add_argument("--codebook", required=True, help="path to codebook.json")
    p.add_argument("--variant", choices=ft.KINDS, default="tfidf_counts")
    p.add_argument("--svd-dim", type=int, default=None)
    p.add_argument("--no-l2", action="store_true")
    p.add_argument("--per-axis-norm", action="store_true")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("sweep", help="run the clustering sweep")
    _add_common(p)
    _add_sweep_knobs(p)
    p.add_argument("--with-stability", action="store_true",
                   help="also run stability on the headline trial")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stability", help="stability analysis for one trial")
    _add_common(p)
    _add_sweep_knobs(p)
    p.add_argument("--report", required=True, help="sweep_report.json")
    p.add_argument("--trial-id", type=int, default=None,
                   help="defaults to the report headline")
    p.add_argument("--reps", type=int, default=None)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("atlas", help="assemble the atlas document")
    _add_common(p)
    _add_sweep_knobs(p)
    p.add_argument("--report", required=True, help="sweep_report.json")
    p.add_argument("--trial-id", type=int, default=None,
                   help="defaults to the report headline")
    p.add_argument("--alt-trial-id", type=int, default=None,
                   help="secondary labeling stored as alt_cluster")
    p.add_argument("--k", type=int, default=5, help="neighborhood size")
    p.add_argument("--html", action="store_true", help="write static HTML export")
    p.set_defaults(func=cmd_atlas)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (cio.CorpusError, cio.EmbeddingTableError, sw.SweepError) as exc:
        _log(f"error: {exc}")
        return EXIT_RUNTIME
    except cio.MissingKeywordError as exc:
        _log(f"error: {exc.args[0]}")
        return EXIT_RUNTIME
    except (OSError, ValueError, KeyError) as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
