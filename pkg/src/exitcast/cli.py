"""Command-line front end: generate data, train components, evaluate, fuse, report.

Subcommands compose through files (records CSV, feature CSV, model files,
metric tables) so any stage of the pipeline can be inspected on its own.
A config file (INI) can pre-set any run option; command-line flags win.
"""
from __future__ import annotations

import argparse
import configparser
import sys
import warnings
from pathlib import Path

import numpy as np

from .domain import LabelMapping, aggregate_label
from .evaluation import (
    MetricsReport,
    average_reports,
    confusion,
    cross_validate,
    knee,
    metrics,
    roc,
    threshold_labels,
    write_metrics_csv,
    write_roc_csv,
)
from .experiment import ConfigError, ExperimentConfig, run_experiment
from .features import build_investor_index, featurize_all, write_feature_csv
from .forest import forest_prob, save_forest
from .ingest import IngestError, SyntheticConfig, generate_synthetic, load_csv, write_csv
from .logreg import logit_prob, save_logistic
from .pca import pca_fit, pca_transform, save_pca
from .specs import ForestSpec, LogRegSpec, SVMSpec
from .svm import svm_prob, svm_tune, save_svm, svm_fit

PROG = "exitcast"


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; flags override its values")
    p.add_argument("--input", help="records CSV to evaluate")
    p.add_argument("--n", type=int, help="generate a synthetic data set of this size instead")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--folds", type=int, help="cross-validation folds (default 10)")
    p.add_argument("--gamma-lr", help="threshold for the linear model: number or 'knee'")
    p.add_argument("--gamma-rf", help="threshold for the forest: number or 'knee'")
    p.add_argument("--gamma-svm", help="threshold for the svm: number or 'knee'")
    p.add_argument("--pca-k", type=int, help="principal components kept for the svm (default 7)")
    p.add_argument("--trees", type=int, help="forest size (default 500)")
    p.add_argument("--mtry", type=int, help="features tried per split (default 4)")
    p.add_argument("--min-node", type=int, help="minimum leaf size (default 1)")
    p.add_argument("--cost", type=float, help="svm misclassification cost (default 0.5)")
    p.add_argument("--alpha", type=float, help="svm kernel width (default 0.125)")
    p.add_argument("--svm-max-train", type=int, help="cap on svm training rows per fold")
    p.add_argument("--fusion", choices=["majority", "unanimity"], help="fusion mode")
    p.add_argument("--sector", help="restrict to one sector 1..9 (default all)")
    p.add_argument("--lbo-negative", action="store_true", help="map buyouts to the negative class")
    p.add_argument("--out", help="output directory (default out)")
    p.add_argument("--threads", type=int, help="worker processes (1 = serial reference)")


def _gamma_value(s: str):
    if s == "knee":
        return s
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"gamma must be a number or 'knee', got {s!r}") from None


def _build_experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(_read_config_file(args.config))

    def override(key: str, value) -> None:
        if value is not None:
            values[key] = value

    override("input_path", args.input)
    override("seed", args.seed)
    override("folds", args.folds)
    if args.gamma_lr is not None:
        values["gamma_lr"] = _gamma_value(args.gamma_lr)
    if args.gamma_rf is not None:
        values["gamma_rf"] = _gamma_value(args.gamma_rf)
    if args.gamma_svm is not None:
        values["gamma_svm"] = _gamma_value(args.gamma_svm)
    override("pca_k", args.pca_k)
    override("trees", args.trees)
    override("mtry", args.mtry)
    override("min_node", args.min_node)
    override("cost", args.cost)
    override("alpha", args.alpha)
    override("svm_max_train", args.svm_max_train)
    override("fusion_mode", args.fusion)
    override("sector", args.sector)
    override("out_dir", args.out)
    override("threads", args.threads)
    if args.lbo_negative:
        values["lbo_positive"] = False
    if args.n is not None:
        values["synth_n"] = args.n

    synth = None
    if values.get("synth_n") is not None:
        synth = SyntheticConfig(
            n_companies=int(values.pop("synth_n")),
            seed=int(values.get("synth_seed", values.get("seed", 0))),
            investor_pool_size=int(values.pop("synth_pool", 500)),
            zipf_exponent=float(values.pop("synth_zipf", 1.1)),
        )
        values.pop("synth_seed", None)
        # A file-provided input yields to a --n flag; two flags are a conflict
        # that validate() reports.
        if args.input is None:
            values.pop("input_path", None)
    else:
        for stale in ("synth_n", "synth_seed", "synth_pool", "synth_zipf"):
            values.pop(stale, None)

    values.setdefault("out_dir", "out")
    try:
        return ExperimentConfig(synth=synth, **values)
    except TypeError as exc:
        raise ConfigError(f"bad configuration key: {exc}") from exc


def _read_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise IngestError(f"cannot read config file {path}")
    values: dict = {}
    if parser.has_section("experiment"):
        sec = parser["experiment"]
        for key in ("seed", "folds", "pca_k", "threads"):
            if key in sec:
                values[key] = sec.getint(key)
        for key in ("gamma_lr", "gamma_rf", "gamma_svm"):
            if key in sec:
                values[key] = _gamma_value(sec[key])
        if "fusion" in sec:
            values["fusion_mode"] = sec["fusion"]
        if "sector" in sec:
            values["sector"] = sec["sector"]
        if "out" in sec:
            values["out_dir"] = sec["out"]
        if "input" in sec:
            values["input_path"] = sec["input"]
        if "lbo_positive" in sec:
            values["lbo_positive"] = sec.getboolean("lbo_positive")
    if parser.has_section("forest"):
        sec = parser["forest"]
        for key in ("trees", "mtry", "min_node"):
            if key in sec:
                values[key] = sec.getint(key)
    if parser.has_section("svm"):
        sec = parser["svm"]
        if "cost" in sec:
            values["cost"] = sec.getfloat("cost")
        if "alpha" in sec:
            values["alpha"] = sec.getfloat("alpha")
        if "max_train" in sec:
            values["svm_max_train"] = sec.getint("max_train")
    if parser.has_section("synthetic"):
        sec = parser["synthetic"]
        if "n" in sec:
            values["synth_n"] = sec.getint("n")
        if "seed" in sec:
            values["synth_seed"] = sec.getint("seed")
        if "pool" in sec:
            values["synth_pool"] = sec.getint("pool")
        if "zipf" in sec:
            values["synth_zipf"] = sec.getfloat("zipf")
    return values


def _load_records(path: str):
    result = load_csv(path)
    for diag in result.diagnostics:
        print(f"warning: {diag}", file=sys.stderr)
    if not result.records:
        raise IngestError(f"{path}: no valid records")
    return result.records


def _print_report(label: str, report, gamma=None) -> None:
    parts = [
        f"{name}={'NA' if getattr(report, name) is None else f'{getattr(report, name):.3f}'}"
        for name in ("prec_pos", "recl_pos", "prec_neg", "recl_neg", "accuracy")
    ]
    suffix = f" gamma={gamma:.2f}" if gamma is not None else ""
    print(f"{label}: " + " ".join(parts) + suffix)


def _cmd_synth(args) -> int:
    cfg = SyntheticConfig(
        n_companies=args.n,
        seed=args.seed or 0,
        investor_pool_size=args.pool,
        zipf_exponent=args.zipf,
        year_range=(args.year_lo, args.year_hi),
    )
    records = generate_synthetic(cfg)
    write_csv(args.out, records)
    mapping = LabelMapping()
    share = np.mean([int(aggregate_label(r.exit, mapping)) for r in records])
    print(f"wrote {len(records)} records to {args.out} (positive share {share:.3f})")
    return 0


def _cmd_features(args) -> int:
    records = _load_records(args.input)
    index = build_investor_index(records)
    X = featurize_all(records, index)
    mapping = LabelMapping()
    y = [int(aggregate_label(r.exit, mapping)) for r in records]
    write_feature_csv(args.out, X, y)
    print(f"wrote {len(records)} feature rows to {args.out}")
    return 0


def _cmd_train(args) -> int:
    records = _load_records(args.input)
    index = build_investor_index(records)
    X = featurize_all(records, index)
    mapping = LabelMapping()
    y = np.array([int(aggregate_label(r.exit, mapping)) for r in records])
    if args.model == "lr":
        spec = LogRegSpec()
        model = spec.fit(X, y, args.seed or 0)
        save_logistic(args.out, model)
        probs = logit_prob(model, X)
    elif args.model == "rf":
        model = ForestSpec(
            n_trees=args.trees or 500, mtry=args.mtry or 4, min_node=args.min_node or 1
        ).fit(X, y, args.seed or 0)
        save_forest(args.out, model)
        probs = forest_prob(model, X)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # constant feature columns are routine
            pca = pca_fit(X, standardize=True)
        Z = pca_transform(pca, X, args.pca_k or 7)
        model = svm_fit(
            Z, y, cost=args.cost or 0.5, alpha=args.alpha or 0.125, seed=args.seed or 0
        )
        save_svm(args.out, model)
        save_pca(str(args.out) + ".pca", pca)
        probs = svm_prob(model, Z)
    acc = float((threshold_labels(probs, 0.5) == y).mean())
    print(f"trained {args.model} on {len(records)} records; training accuracy {acc:.3f}")
    return 0


def _component_spec(args):
    if args.model == "lr":
        return LogRegSpec()
    if args.model == "rf":
        return ForestSpec(
            n_trees=args.trees or 500, mtry=args.mtry or 4, min_node=args.min_node or 1
        )
    return SVMSpec(
        cost=args.cost or 0.5,
        alpha=args.alpha or 0.125,
        pca_components=args.pca_k or 7,
        max_train=args.svm_max_train,
    )


def _cmd_eval(args) -> int:
    records = _load_records(args.input)
    spec = _component_spec(args)
    gamma = _gamma_value(args.gamma)
    result = cross_validate(
        records, spec, 0.5 if gamma == "knee" else gamma,
        k=args.folds or 10, seed=args.seed or 0,
    )
    if gamma == "knee":
        scored = ~np.isnan(result.oof_probs)
        gamma = knee(roc(result.oof_probs[scored], result.truths[scored]))
    rows = _per_sector_rows(records, result, gamma)
    _print_report(args.model, rows[-1][1], gamma)
    if args.out:
        write_metrics_csv(args.out, rows)
        print(f"wrote metrics table to {args.out}")
    return 0


def _per_sector_rows(records, result, gamma):
    sectors = np.array([r.sector for r in records])
    scored = ~np.isnan(result.oof_probs)
    labels = threshold_labels(np.where(scored, result.oof_probs, 0.0), gamma)
    rows = []
    for label, mask in [(str(s), sectors == s) for s in range(1, 10)] + [
        ("all", np.ones(len(records), dtype=bool))
    ]:
        fold_reports = []
        for fold in range(result.folds.k):
            sel = mask & (result.folds.fold_of == fold) & scored
            if sel.any():
                fold_reports.append(metrics(confusion(result.truths[sel], labels[sel])))
        report = (
            average_reports(fold_reports)[0]
            if fold_reports
            else MetricsReport(None, None, None, None, None)
        )
        rows.append((label, report, gamma))
    return rows


def _cmd_roc(args) -> int:
    records = _load_records(args.input)
    spec = _component_spec(args)
    result = cross_validate(records, spec, 0.5, k=args.folds or 10, seed=args.seed or 0)
    scored = ~np.isnan(result.oof_probs)
    curve = roc(result.oof_probs[scored], result.truths[scored])
    write_roc_csv(args.out, curve)
    print(f"wrote ROC curve to {args.out} (knee at gamma={knee(curve):.2f})")
    return 0


def _cmd_tune_svm(args) -> int:
    records = _load_records(args.input)
    result = svm_tune(
        records,
        n_sessions=args.sessions,
        session_size=args.session_size,
        seed=args.seed or 0,
        cv_folds=args.cv_folds,
        pca_components=args.pca_k or 7,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("session,cost,alpha\n")
        for i, (c, a) in enumerate(zip(result.session_costs, result.session_alphas)):
            fh.write(f"{i},{c!r},{a!r}\n")
    print(
        f"tuned over {args.sessions} sessions: "
        f"median cost={result.median_cost} alpha={result.median_alpha}; "
        f"mode cost={result.mode_cost} alpha={result.mode_alpha}"
    )
    return 0


def _cmd_run(args) -> int:
    cfg = _build_experiment_config(args)
    result = run_experiment(cfg)
    for diag in result.load_diagnostics:
        print(f"warning: {diag}", file=sys.stderr)
    for name in ("lr", "rf", "svm"):
        _print_report(name, result.component_reports[name], result.resolved_gammas[name])
    _print_report(f"fused_{cfg.fusion_mode}", result.fused_report)
    print(f"artifacts written to {result.out_dir}")
    return 0


def _cmd_fuse(args) -> int:
    status = _cmd_run(args)
    return status


def _cmd_report(args) -> int:
    out = Path(args.dir)
    metrics_path = out / "metrics.csv"
    fusion_path = out / "fusion.csv"
    if not metrics_path.exists() or not fusion_path.exists():
        raise IngestError(f"{out} does not look like a run directory")
    print(metrics_path.read_text(encoding="utf-8").rstrip())
    print()
    print(fusion_path.read_text(encoding="utf-8").rstrip())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Exit-outcome prediction pipeline: synthesize, train, evaluate, fuse.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic records CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pool", type=int, default=500, help="investor pool size")
    p.add_argument("--zipf", type=float, default=1.1, help="investor popularity skew")
    p.add_argument("--year-lo", type=int, default=1996)
    p.add_argument("--year-hi", type=int, default=2011)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("features", help="export the feature matrix for a records CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="fit one component on a records CSV and save it")
    p.add_argument("--model", choices=["lr", "rf", "svm"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--seed", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--mtry", type=int)
    p.add_argument("--min-node", type=int)
    p.add_argument("--cost", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--pca-k", type=int)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="cross-validated metrics for one component")
    p.add_argument("--model", choices=["lr", "rf", "svm"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--gamma", default="0.5", help="number or 'knee'")
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--mtry", type=int)
    p.add_argument("--min-node", type=int)
    p.add_argument("--cost", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--pca-k", type=int)
    p.add_argument("--svm-max-train", type=int)
    p.add_argument("--out", help="write the per-sector metrics CSV here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("roc", help="cross-validated ROC curve for one component")
    p.add_argument("--model", choices=["lr", "rf", "svm"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--mtry", type=int)
    p.add_argument("--min-node", type=int)
    p.add_argument("--cost", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--pca-k", type=int)
    p.add_argument("--svm-max-train", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_roc)

    p = sub.add_parser("tune-svm", help="repeated-subsample grid search for svm parameters")
    p.add_argument("--input", required=True)
    p.add_argument("--sessions", type=int, default=200)
    p.add_argument("--session-size", type=int, default=1600)
    p.add_argument("--cv-folds", type=int, default=3)
    p.add_argument("--pca-k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="per-session results CSV")
    p.set_defaults(func=_cmd_tune_svm)

    for name, help_text in [
        ("run", "full experiment: all components, fusion, artifacts"),
        ("fuse", "alias of run, for fusion-focused workflows"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_run_flags(p)
        p.set_defaults(func=_cmd_run if name == "run" else _cmd_fuse)

    p = sub.add_parser("report", help="print the tables from a finished run directory")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if exc.code is not None else 0
        return 0 if code == 0 else 1  # argparse usage problems are config errors
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"{PROG}: config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"{PROG}: config error: {exc}", file=sys.stderr)
        return 1
    except (IngestError, OSError) as exc:
        print(f"{PROG}: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
