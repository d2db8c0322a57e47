"""Command line interface: ``gamlab benchmark | fit | rank | plot | scores``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .core import ModelFamily, TaskKind

log = logging.getLogger("gamlab")

FAMILY_ALIASES = {"pspline": "pspline", "ebm": "tree_gam", "tree_gam": "tree_gam",
                  "igann": "elm_gam", "elm_gam": "elm_gam", "lr": "linear", "linear": "linear",
                  "dt": "tree", "tree": "tree"}


def _family(name: str) -> str:
    try:
        return FAMILY_ALIASES[name.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(
            f"unknown model {name!r}; choose from {sorted(FAMILY_ALIASES)}") from None


def _setting(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip().replace("-", "_"), yaml.safe_load(v)


def cmd_benchmark(args) -> int:
    from .harness import load_run_config, run_experiment
    cfg = load_run_config(args.config)
    if args.jobs is not None:
        cfg.n_jobs = args.jobs
    if args.debug:
        cfg.debug = True
    if args.output_dir:
        cfg.output_dir = args.output_dir
    store = run_experiment(cfg)
    for group, table in store.ranks.items():
        print(f"== {group} ==")
        print(table.to_text())
    print(f"results written to {store.run_dir}")
    if cfg.debug:
        print(f"leakage test-row accesses: {store.manifest['leakage_test_row_accesses']}")
    return 0


def _load_raw(args):
    """Raw dataset and drop list from a descriptor or a CSV plus flags."""
    from .preprocess import DatasetDescriptor, load_dataset, load_descriptor
    path = Path(args.dataset)
    if path.suffix in (".yaml", ".yml", ".json"):
        desc = load_descriptor(path)
    else:
        if not args.target or not args.task:
            raise SystemExit("--target and --task are required for a CSV dataset")
        desc = DatasetDescriptor(name=path.stem, path=str(path), target=args.target,
                                 task=args.task)
    return load_dataset(desc), list(desc.drop) + list(args.drop or [])


def cmd_fit(args) -> int:
    from .grids import default_config
    from .harness import evaluate, fit_config
    from .metrics import primary_metric, secondary_metrics
    from .serialization import save_model

    raw, drop = _load_raw(args)
    family = args.model
    config = default_config(family, raw.task)
    for flag, key in (("lam", "lam"), ("n_splines", "n_splines")):
        v = getattr(args, flag)
        if v is not None:
            if family != ModelFamily.PSPLINE.value:
                raise SystemExit(f"--{flag.replace('_', '-')} applies to pspline only")
            config[key] = v
    config.update(dict(args.set or []))
    plan, est, seconds = fit_config(family, raw, config, args.seed, drop)
    y, pred = evaluate(plan, est, raw)
    report = {"dataset": raw.name, "model": family, "config": config, "n_rows": len(y),
              "fit_seconds": seconds, "train_metric": primary_metric(raw.task, y, pred),
              "train_secondary": secondary_metrics(raw.task, y, pred)}
    if args.out:
        out = Path(args.out)
        save_model(est, out)
        out.with_suffix(".plan.json").write_text(plan.to_json() + "\n", encoding="utf-8")
        report["model_file"] = str(out)
    print(json.dumps(report, indent=2, sort_keys=True, default=str))
    return 0


def cmd_rank(args) -> int:
    from .harness import rank_results
    tables = rank_results(args.results, args.imports or [], args.out)
    for group, table in tables.items():
        print(f"== {group} ==")
        print(table.to_text())
    return 0


def cmd_plot(args) -> int:
    from .core import AdditiveModel
    from .serialization import load_model
    from .shape_export import export_shapes, exports_to_csv
    from .svg import render_svg

    model = load_model(args.model)
    if not isinstance(model, AdditiveModel):
        raise SystemExit("plot needs an additive model file")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    exports = export_shapes(model, args.grid_points, model_name=Path(args.model).stem)
    exports_to_csv(exports, out / "shapes.csv")
    (out / "shapes.svg").write_text(render_svg(exports, ncols=args.ncols), encoding="utf-8")
    print(f"{len(exports)} shape(s) written to {out}")
    return 0


def cmd_scores(args) -> int:
    from .interpretability import (CRITERIA, read_sheet, read_weights, scorecards, total_score,
                                   weighted_score)
    sheet = read_sheet(args.sheet) if args.sheet else None
    cards = scorecards(sheet, rater=args.rater)
    weights = read_weights(args.weights) if args.weights else {c: 1 for c in CRITERIA}
    ws = weighted_score(cards, weights)
    print(f"{'model':<12}{'total':>7}{'weighted':>10}")
    for c in cards:
        print(f"{c.model:<12}{total_score(c):>7}{ws.scores[c.model]:>10}")
    if ws.degenerate:
        print("all weighted scores are equal; rescaled scores set to 0")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gamlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("benchmark", help="run a cross-validated benchmark")
    b.add_argument("--config", required=True, help="YAML run configuration")
    b.add_argument("--jobs", type=int, help="worker processes")
    b.add_argument("--debug", action="store_true", help="enable the leakage audit")
    b.add_argument("--output-dir", help="override the output directory")
    b.set_defaults(func=cmd_benchmark)

    f = sub.add_parser("fit", help="fit one model on a whole dataset")
    f.add_argument("--dataset", required=True, help="CSV file or YAML dataset descriptor")
    f.add_argument("--target")
    f.add_argument("--task", choices=[t.value for t in TaskKind])
    f.add_argument("--drop", nargs="*", help="columns to drop")
    f.add_argument("--model", required=True, type=_family,
                   help="pspline, ebm (tree_gam), igann (elm_gam), lr (linear) or dt (tree)")
    f.add_argument("--lam", type=float)
    f.add_argument("--n-splines", type=int)
    f.add_argument("--set", type=_setting, action="append", metavar="KEY=VALUE",
                   help="any other hyperparameter")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", help="model file to write (JSON)")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("rank", help="average ranks of a finished run")
    r.add_argument("--results", required=True, help="run directory holding folds.csv")
    r.add_argument("--import", dest="imports", action="append", metavar="CSV",
                   help="external results to merge (repeatable)")
    r.add_argument("--out", help="directory for the rank tables (default: --results)")
    r.set_defaults(func=cmd_rank)

    pl = sub.add_parser("plot", help="export shape plots of a saved model")
    pl.add_argument("--model", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--grid-points", type=int, default=256)
    pl.add_argument("--ncols", type=int)
    pl.set_defaults(func=cmd_plot)

    s = sub.add_parser("scores", help="interpretability totals and weighted scores")
    s.add_argument("--sheet", help="rater sheet CSV (default: shipped ratings)")
    s.add_argument("--rater", help="rater to score (default: first in sheet)")
    s.add_argument("--weights", help="YAML mapping criterion -> weight")
    s.set_defaults(func=cmd_scores)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"gamlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
