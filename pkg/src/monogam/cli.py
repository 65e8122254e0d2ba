"""Command-line surface: simulate, filter, fit, export-terms, verify, report.

Exit codes: 0 ok, 1 audit failure, 2 usage, 3 I/O or parse failure,
4 internal pipeline failure. All JSON output is single-line and key-sorted
so reruns diff cleanly.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import anova, booster, report, screening
from .data import (SimConfig, bin_features, generate_first_order,
                   generate_second_order, read_dataset_csv, split_dataset,
                   write_dataset_csv)
from .pipeline import PipelineConfig, PipelineError, run_pipeline

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PIPELINE = 4


class UsageError(ValueError):
    pass


def _emit(payload) -> None:
    print(json.dumps(payload, sort_keys=True, separators=(",", ":")))


def _write_json(payload, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _parse_monotone(text: str, p: int):
    mapping = {"+": 1, "-": -1, "0": 0, "+1": 1, "-1": -1}
    parts = [t.strip() for t in text.split(",")]
    if len(parts) != p:
        raise UsageError(f"monotone spec has {len(parts)} entries, expected {p}")
    try:
        return tuple(mapping[t] for t in parts)
    except KeyError as exc:
        raise UsageError(f"bad monotone entry {exc.args[0]!r}; use +, - or 0") from exc


def _require_files(*paths):
    for path in paths:
        if not os.path.isfile(path):
            raise UsageError(f"no such file: {path}")


def cmd_simulate(args) -> int:
    if args.sigma < 0:
        raise UsageError("--sigma must be >= 0")
    if args.n < 4:
        raise UsageError("--n must be >= 4 to fill all three splits")
    cfg = SimConfig(n=args.n, sigma=args.sigma, seed=args.seed,
                    response_kind=args.kind)
    gen = generate_first_order if args.model == "first" else generate_second_order
    ds = gen(cfg)
    train, valid, test = split_dataset(ds, (0.5, 0.25, 0.25), seed=args.seed + 1)
    os.makedirs(args.out, exist_ok=True)
    files = {}
    for name, part in (("train", train), ("valid", valid), ("test", test)):
        path = os.path.join(args.out, f"{name}.csv")
        write_dataset_csv(part, path)
        files[name] = {"path": path, "rows": part.n}
    _emit({"command": "simulate", "model": args.model, "kind": args.kind,
           "n": args.n, "seed": args.seed, "sigma": args.sigma, "files": files})
    return EXIT_OK


def cmd_filter(args) -> int:
    _require_files(args.train, args.valid)
    train = read_dataset_csv(args.train)
    valid = read_dataset_csv(args.valid, train.response_kind)
    n_pairs = train.p * (train.p - 1) // 2
    if not 0 <= args.k <= n_pairs:
        raise UsageError(f"--k must be in [0, {n_pairs}] for p={train.p}")
    gam_cfg = booster.BoostConfig(n_trees=args.trees, max_depth=1,
                                  learning_rate=0.1, reg_lambda=1.0,
                                  early_stopping_rounds=50)
    gam = screening.fit_initial_gam(train, valid, gam_cfg)
    resid = screening.residuals(train, gam)
    ranked = screening.fast_filter(resid, bin_features(train, args.bins), args.k)
    payload = [{"j": s.j, "k": s.k, "score": s.score} for s in ranked]
    if args.out:
        _write_json(payload, args.out)
    _emit(payload)
    return EXIT_OK


def cmd_fit(args) -> int:
    _require_files(args.train, args.valid, args.test)
    train = read_dataset_csv(args.train)
    valid = read_dataset_csv(args.valid, train.response_kind)
    test = read_dataset_csv(args.test, train.response_kind)
    n_pairs = train.p * (train.p - 1) // 2
    if not 0 <= args.k <= n_pairs:
        raise UsageError(f"--k must be in [0, {n_pairs}] for p={train.p}")
    monotone = _parse_monotone(args.monotone, train.p)
    if args.grid:
        _require_files(args.grid)
        with open(args.grid, "r", encoding="utf-8") as fh:
            grid = json.load(fh)
        cfg = PipelineConfig(k=args.k, monotone=monotone, hyper_grid=grid)
    else:
        cfg = PipelineConfig(k=args.k, monotone=monotone)

    fitted = run_pipeline(train, valid, test, cfg)

    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, "model.json")
    booster.save_model(fitted.ensemble, model_path)
    terms_dir = os.path.join(args.out, "terms")
    anova.export_terms(fitted.terms, train, terms_dir)

    manifest = {
        "command": "fit",
        "config": {"k": cfg.k, "monotone": list(cfg.monotone),
                   "hyper_grid": cfg.hyper_grid, "n_bins": cfg.n_bins,
                   "early_stopping_rounds": cfg.early_stopping_rounds,
                   "fractions": list(cfg.fractions), "seed": cfg.seed},
        "selected_pairs": [{"j": s.j, "k": s.k, "score": s.score}
                           for s in fitted.selected_pairs],
        "chosen_hypers": fitted.chosen_hypers,
        "metrics": fitted.metrics,
        "n_trees_fitted": len(fitted.ensemble.trees),
        "importances": [{"features": list(key), "sd": sd}
                        for key, sd in fitted.importances],
        "files": {"model": model_path, "terms": terms_dir,
                  "terms_manifest": os.path.join(terms_dir, "manifest.json")},
    }
    _write_json(manifest, os.path.join(args.out, "run_manifest.json"))
    _emit(manifest)
    return EXIT_OK


def cmd_export_terms(args) -> int:
    _require_files(args.model, args.train)
    ens = booster.load_model(args.model)
    train = read_dataset_csv(args.train)
    store = anova.purify(anova.parse_ensemble(ens), train)
    manifest = anova.export_terms(store, train, args.out)
    _emit({"command": "export-terms", "out": args.out,
           "terms": len(manifest["terms"])})
    return EXIT_OK


def cmd_verify(args) -> int:
    _require_files(args.model, args.train)
    ens = booster.load_model(args.model)
    train = read_dataset_csv(args.train)
    if train.p != ens.p:
        raise UsageError(f"model expects {ens.p} features, data has {train.p}")

    checks = {}
    bad_paths = booster.audit_interaction_compliance(ens)
    checks["constraint_audit"] = {"passed": not bad_paths,
                                  "bad_paths": [list(b[1]) for b in bad_paths]}

    store = anova.parse_ensemble(ens)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    lo = train.features.min(axis=0)
    hi = train.features.max(axis=0)
    points = lo + (hi - lo) * rng.random((args.lines, train.p))
    gap = float(np.max(np.abs(store.predict(points) - ens.predict(points))))
    checks["parse_identity"] = {"passed": gap <= 1e-8, "max_abs_gap": gap}

    purified = anova.purify(store, train)
    sweep = anova.check_monotone_full(purified, ens.constraints,
                                      n_lines=args.lines, n_grid=args.grid,
                                      seed=args.seed)
    checks["monotone"] = {"passed": sweep.passed,
                          "violations": len(sweep.violations),
                          "checked_steps": sweep.n_checked}

    norms = anova.orthogonality_audit(purified, train)
    worst = max(norms.values(), default=0.0)
    checks["orthogonality"] = {"passed": worst <= 1e-6, "max_norm": worst}

    passed = all(c["passed"] for c in checks.values())
    _emit({"command": "verify", "checks": checks, "passed": passed})
    return EXIT_OK if passed else EXIT_AUDIT


def cmd_report(args) -> int:
    terms_dir = args.terms or os.path.join(args.run, "terms")
    manifest_path = os.path.join(terms_dir, "manifest.json")
    _require_files(manifest_path)
    index = report.render_terms(terms_dir, args.out)
    _emit({"command": "report", "terms": terms_dir,
           "figures": sorted(index.values())})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monogam",
        description="Monotone boosted-tree additive models with purified "
                    "pairwise interactions.")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="write train/valid/test CSVs for a benchmark")
    ps.add_argument("--model", choices=("first", "second"), required=True)
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--sigma", type=float, default=2.0)
    ps.add_argument("--kind", choices=("continuous", "binary"), default="continuous")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_simulate)

    pf = sub.add_parser("filter", help="rank candidate interaction pairs")
    pf.add_argument("--train", required=True)
    pf.add_argument("--valid", required=True)
    pf.add_argument("--k", type=int, required=True)
    pf.add_argument("--bins", type=int, default=32)
    pf.add_argument("--trees", type=int, default=2000)
    pf.add_argument("--out")
    pf.set_defaults(func=cmd_filter)

    pt = sub.add_parser("fit", help="run the full pipeline and write artifacts")
    pt.add_argument("--train", required=True)
    pt.add_argument("--valid", required=True)
    pt.add_argument("--test", required=True)
    pt.add_argument("--k", type=int, required=True)
    pt.add_argument("--monotone", required=True,
                    help="comma list aligned with CSV columns, e.g. +,+,+,+")
    pt.add_argument("--out", required=True)
    pt.add_argument("--grid", help="JSON file overriding the hyper grid")
    pt.set_defaults(func=cmd_fit)

    pe = sub.add_parser("export-terms", help="decompose a saved model into term grids")
    pe.add_argument("--model", required=True)
    pe.add_argument("--train", required=True)
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_export_terms)

    pv = sub.add_parser("verify", help="audit a saved model against its contracts")
    pv.add_argument("--model", required=True)
    pv.add_argument("--train", required=True)
    pv.add_argument("--lines", type=int, default=1000)
    pv.add_argument("--grid", type=int, default=50)
    pv.add_argument("--seed", type=int, default=0)
    pv.set_defaults(func=cmd_verify)

    pr = sub.add_parser("report", help="render exported term grids to figures")
    pr.add_argument("--run", help="fit output directory (uses its terms/)")
    pr.add_argument("--terms", help="terms directory (overrides --run)")
    pr.add_argument("--out", help="figure directory (default: beside the CSVs)")
    pr.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    if args.command == "report" and not (args.run or args.terms):
        print("error: report needs --run or --terms", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
