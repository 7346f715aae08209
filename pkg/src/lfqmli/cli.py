"""``lfqa`` command line: extract, train, predict, evaluate.

Exit codes: 0 success, 2 input error, 3 numeric failure.  Failures print a
single ``lfqa: error[Tag]: message`` line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InputError, LfqaError
from .evaluation import run_trials
from .features import FeatureConfig, extract_feature_vector, parse_subset, select_features
from .io import (
    FeatureCache,
    align,
    check_config,
    format_report_table,
    parse_manifest,
    read_feature_cache,
    read_model,
    report_to_json,
    write_feature_cache,
    write_model,
    fmt,
)
from .lightfield import load_light_field
from .svr import Hyperparams, default_grid, grid_search_cv, svr_predict, svr_train

log = logging.getLogger("lfqa")


class UsageError(InputError):
    pass


def parse_angular(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"angular dims must look like 9x9, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _parse_number(tok: str) -> float:
    tok = tok.strip()
    if tok.startswith("2^"):
        return 2.0 ** float(tok[2:])
    return float(tok)


def parse_grid(text: str) -> list[Hyperparams]:
    """``default`` or ``C=1,2^3;gamma=2^-3,0.5;epsilon=0.1``."""
    if text == "default":
        return default_grid()
    axes = {"C": None, "gamma": None, "epsilon": [0.1]}
    try:
        for part in text.split(";"):
            key, _, vals = part.partition("=")
            key = key.strip()
            if key not in axes or not vals:
                raise ValueError(part)
            axes[key] = [_parse_number(v) for v in vals.split(",")]
        if axes["C"] is None or axes["gamma"] is None:
            raise ValueError("C and gamma are required")
        return [Hyperparams(C, g, e) for C in axes["C"] for g in axes["gamma"] for e in axes["epsilon"]]
    except ValueError as exc:
        raise UsageError(f"bad --grid {text!r}: {exc}") from None


# -- commands ---------------------------------------------------------------


def cmd_extract(args) -> int:
    manifest = parse_manifest(args.manifest)
    config = FeatureConfig(args.keep, args.threshold, args.sai)

    def work(row):
        try:
            lf = load_light_field(manifest.resolve(row), args.angular, args.naming)
            return extract_feature_vector(lf, config), None
        except LfqaError as exc:
            return None, exc

    jobs = max(1, args.jobs)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, manifest.rows))
    else:
        results = [work(r) for r in manifest.rows]

    paths, vals, fbs = [], [], []
    for row, (fv, err) in zip(manifest.rows, results):
        if err is not None:
            if not args.skip_bad:
                raise type(err)(f"{row.path}: {err}")
            print(f"lfqa: skipped[{err.tag}]: {row.path}: {err}", file=sys.stderr)
            continue
        paths.append(row.path)
        vals.append(fv.values)
        fbs.append(fv.ulbp_fallback)
        if fv.ulbp_fallback:
            log.warning("%s: no MLI exceeds the range threshold; ULBP averaged over all MLIs", row.path)
    cache = FeatureCache(config, tuple(paths), np.array(vals).reshape(-1, 14), tuple(fbs))
    write_feature_cache(cache, args.out)
    log.info("wrote %d feature rows to %s", len(paths), args.out)
    return 0


def _load_training_data(args):
    cache = read_feature_cache(args.features)
    manifest = parse_manifest(args.manifest)
    subset = parse_subset(args.features_subset)
    X = select_features(align(cache, manifest), subset)
    return cache, manifest, subset, X


def cmd_train(args) -> int:
    cache, manifest, subset, X = _load_training_data(args)
    y = manifest.mos
    hp = grid_search_cv(X, y, parse_grid(args.grid), folds=args.folds, seed=args.seed)
    model = svr_train(X, y, hp)
    write_model(model, args.out, subset, cache.config)
    log.info("trained C=%g gamma=%g epsilon=%g with %d support vectors", hp.C, hp.gamma, hp.epsilon, model.dual_coefs.size)
    return 0


def cmd_predict(args) -> int:
    model, subset, config = read_model(args.model)
    cache = read_feature_cache(args.features)
    check_config(cache, config)
    pred = np.atleast_1d(svr_predict(model, select_features(cache.values, subset)))
    text = "path,predicted_mos\n" + "".join(f"{p},{fmt(v)}\n" for p, v in zip(cache.paths, pred))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    cache, manifest, subset, X = _load_training_data(args)
    groups = manifest.scenes if args.split_by == "scene" else None
    report = run_trials(
        X,
        manifest.mos,
        trials=args.trials,
        train_fraction=args.split,
        seed=args.seed,
        grid=parse_grid(args.grid),
        groups=groups,
        folds=args.folds,
        logistic=args.logistic_map,
        jobs=args.jobs,
    )
    table = format_report_table(report)
    sys.stdout.write(table)
    if args.out:
        meta = {
            "train_fraction": args.split,
            "split_by": args.split_by,
            "features_subset": ",".join(subset),
            "logistic_map": args.logistic_map,
            "grid": args.grid,
            "feature_config": {"keep": cache.config.keep, "threshold": cache.config.threshold, "sai": cache.config.sai},
        }
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report_to_json(report, **meta))
    if args.table:
        with open(args.table, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table)
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfqa", description="No-reference light-field quality assessment")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute feature vectors for every manifest row")
    p.add_argument("--manifest", required=True)
    p.add_argument("--angular", required=True, type=parse_angular, metavar="UxV")
    p.add_argument("--naming", default=None, help="view file template, e.g. '{u}_{v}'")
    p.add_argument("--keep", type=float, default=0.6)
    p.add_argument("--threshold", type=int, default=20)
    p.add_argument("--sai", choices=("central", "all"), default="central")
    p.add_argument("--skip-bad", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    def training_args(p):
        p.add_argument("--features", required=True, help="feature cache file")
        p.add_argument("--manifest", required=True)
        p.add_argument("--features-subset", default=None, help="comma list of ged,ulbp,sq")
        p.add_argument("--grid", default="default")
        p.add_argument("--folds", type=int, default=5)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="grid-search and fit an SVR on all rows")
    training_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a feature cache with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="randomised train/test trials")
    training_args(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--split-by", choices=("row", "scene"), default="row")
    p.add_argument("--logistic-map", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="JSON report path")
    p.add_argument("--table", default=None, help="text table path")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="lfqa: %(message)s")
    try:
        return args.func(args)
    except LfqaError as exc:
        print(f"lfqa: error[{exc.tag}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"lfqa: error[InvalidArgument]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
