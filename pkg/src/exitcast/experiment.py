"""Wire every stage into one reproducible experiment run with file artifacts.

A run: build (or load) the record set, cross-validate the three components
on shared folds, resolve thresholds, fuse the votes, and write the metric
tables, ROC curves, variance curve, fusion report, and a manifest that
pins the whole configuration.  Identical configurations produce byte-identical
artifacts, whatever the worker count.
"""
from __future__ import annotations

import csv
import json
import platform
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .domain import BinaryLabel, CompanyRecord, LabelMapping, aggregate_label
from .evaluation import (
    METRIC_FIELDS,
    MetricsReport,
    average_reports,
    confusion,
    fit_fold,
    knee,
    metrics,
    roc,
    threshold_labels,
    write_roc_csv,
)
from .features import build_investor_index, featurize_all
from .fusion import (
    FusionReport,
    TriplePrediction,
    fuse_majority_labels,
    fuse_unanimity_labels,
    voting_dynamics,
    write_fusion_csv,
)
from .ingest import SyntheticConfig, generate_synthetic, load_csv
from .pca import pca_fit, write_cumvar_csv
from .sampling import FoldAssignment, kfold
from .specs import COMPONENT_ORDER, ForestSpec, LogRegSpec, SVMSpec

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "run_experiment",
    "run_components",
    "ARTIFACT_NAMES",
]

ARTIFACT_NAMES = (
    "metrics.csv",
    "roc_lr.csv",
    "roc_rf.csv",
    "roc_svm.csv",
    "cumvar.csv",
    "fusion.csv",
)
MANIFEST_NAME = "manifest.json"


class ConfigError(Exception):
    """The experiment configuration is unusable as given."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat run configuration; exactly one of input_path / synth supplies data."""

    out_dir: str
    input_path: str | None = None
    synth: SyntheticConfig | None = None
    seed: int = 0
    folds: int = 10
    lbo_positive: bool = True
    gamma_lr: float | str = 0.5
    gamma_rf: float | str = 0.5
    gamma_svm: float | str = 0.5
    pca_k: int = 7
    trees: int = 500
    mtry: int = 4
    min_node: int = 1
    cost: float = 0.5
    alpha: float = 0.125
    svm_max_train: int | None = None
    fusion_mode: str = "majority"
    sector: str = "all"
    threads: int = 1

    def validate(self) -> None:
        if (self.input_path is None) == (self.synth is None):
            raise ConfigError("exactly one of input_path / synth must be given")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        for name in ("gamma_lr", "gamma_rf", "gamma_svm"):
            g = getattr(self, name)
            if isinstance(g, str):
                if g != "knee":
                    raise ConfigError(f"{name} must be a number in (0,1) or 'knee', got {g!r}")
            elif not 0.0 < g < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {g}")
        if not 1 <= self.pca_k:
            raise ConfigError(f"pca_k must be >= 1, got {self.pca_k}")
        if self.trees < 1 or self.mtry < 1 or self.min_node < 1:
            raise ConfigError("forest parameters must all be >= 1")
        if self.cost <= 0 or self.alpha <= 0:
            raise ConfigError("svm cost and alpha must be positive")
        if self.svm_max_train is not None and self.svm_max_train < 2:
            raise ConfigError("svm_max_train must be >= 2 when set")
        if self.fusion_mode not in ("majority", "unanimity"):
            raise ConfigError(f"fusion_mode must be majority or unanimity, got {self.fusion_mode!r}")
        if self.sector != "all" and self.sector not in {str(s) for s in range(1, 10)}:
            raise ConfigError(f"sector must be 'all' or '1'..'9', got {self.sector!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    def specs(self) -> dict[str, object]:
        return {
            "lr": LogRegSpec(),
            "rf": ForestSpec(n_trees=self.trees, mtry=self.mtry, min_node=self.min_node),
            "svm": SVMSpec(
                cost=self.cost,
                alpha=self.alpha,
                pca_components=self.pca_k,
                max_train=self.svm_max_train,
            ),
        }


@dataclass(frozen=True)
class ExperimentResult:
    """Everything a run produced, in memory plus on disk."""

    out_dir: Path
    records: list[CompanyRecord]
    truths: np.ndarray
    folds: FoldAssignment
    oof_probs: dict[str, np.ndarray]
    resolved_gammas: dict[str, float]
    component_reports: dict[str, MetricsReport]
    fused_report: MetricsReport
    fusion_dynamics: FusionReport
    skipped_folds: tuple[int, ...]
    load_diagnostics: list[str]


# Worker-side state for parallel fold evaluation (set once per process).
_CTX: dict | None = None


def _init_worker(records, y, fold_of, k, specs, seed) -> None:
    global _CTX
    _CTX = {
        "records": records,
        "y": y,
        "folds": FoldAssignment(fold_of=fold_of, k=k),
        "specs": specs,
        "seed": seed,
    }


def _run_task(task: tuple[str, int]):
    name, fold = task
    ctx = _CTX
    probs = fit_fold(
        ctx["records"], ctx["y"], ctx["folds"], fold, ctx["specs"][name], ctx["seed"]
    )
    return name, fold, probs


def run_components(
    records: Sequence[CompanyRecord],
    y: np.ndarray,
    folds: FoldAssignment,
    specs: dict[str, object],
    seed: int,
    threads: int = 1,
) -> tuple[dict[str, np.ndarray], tuple[int, ...]]:
    """Out-of-fold probabilities per component over shared folds.

    Tasks are independent (component, fold) pairs with seed-derived streams,
    so any worker count produces bit-identical results.  Returns the
    probability arrays (NaN where a fold was skipped) and the skipped folds.
    """
    tasks = [(name, fold) for name in specs for fold in range(folds.k)]
    results = []
    if threads == 1:
        for task in tasks:
            name, fold = task
            results.append((name, fold, fit_fold(records, y, folds, fold, specs[name], seed)))
    else:
        with ProcessPoolExecutor(
            max_workers=threads,
            initializer=_init_worker,
            initargs=(list(records), y, folds.fold_of, folds.k, specs, seed),
        ) as pool:
            results = list(pool.map(_run_task, tasks))

    oof = {name: np.full(len(records), np.nan) for name in specs}
    skipped: set[int] = set()
    for name, fold, probs in results:
        if probs is None:
            skipped.add(fold)
            continue
        oof[name][folds.test_indices(fold)] = probs
    return oof, tuple(sorted(skipped))


def _resolve_gamma(setting: float | str, probs: np.ndarray, truths: np.ndarray) -> float:
    if setting == "knee":
        scored = ~np.isnan(probs)
        return knee(roc(probs[scored], truths[scored]))
    return float(setting)


def _sector_rows(
    sectors: np.ndarray,
    truths: np.ndarray,
    labels: np.ndarray,
    folds: FoldAssignment,
    scored: np.ndarray,
    gamma: float,
) -> list[tuple[str, MetricsReport, float]]:
    """Fold-averaged metric rows for each sector plus the pooled 'all' row."""
    rows: list[tuple[str, MetricsReport, float]] = []
    groups = [(str(s), sectors == s) for s in range(1, 10)] + [
        ("all", np.ones(len(sectors), dtype=bool))
    ]
    for label, mask in groups:
        fold_reports = []
        for fold in range(folds.k):
            sel = mask & (folds.fold_of == fold) & scored
            if not sel.any():
                continue
            fold_reports.append(metrics(confusion(truths[sel], labels[sel])))
        if fold_reports:
            rows.append((label, average_reports(fold_reports)[0], gamma))
        else:
            rows.append((label, MetricsReport(None, None, None, None, None), gamma))
    return rows


def _write_combined_metrics(path, rows: list[tuple[str, str, MetricsReport, float | None]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "sector"] + list(METRIC_FIELDS) + ["gamma"])
        for component, sector, report, gamma in rows:
            writer.writerow(
                [component, sector]
                + ["NA" if v is None else repr(float(v)) for v in
                   (getattr(report, n) for n in METRIC_FIELDS)]
                + ["NA" if gamma is None else repr(float(gamma))]
            )


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Execute the full pipeline described by ``cfg`` and write its artifacts."""
    cfg.validate()
    load_diagnostics: list[str] = []
    if cfg.input_path is not None:
        loaded = load_csv(cfg.input_path)
        records = loaded.records
        load_diagnostics = loaded.diagnostics
    else:
        records = generate_synthetic(cfg.synth)
    if cfg.sector != "all":
        records = [r for r in records if r.sector == int(cfg.sector)]
    if len(records) < cfg.folds:
        raise ConfigError(
            f"need at least {cfg.folds} records for {cfg.folds}-fold evaluation, got {len(records)}"
        )

    mapping = LabelMapping(
        lbo=BinaryLabel.POSITIVE if cfg.lbo_positive else BinaryLabel.NEGATIVE
    )
    y = np.array([int(aggregate_label(r.exit, mapping)) for r in records], dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ConfigError("records are single-class overall; nothing to evaluate")
    sectors = np.array([r.sector for r in records], dtype=np.int64)

    folds = kfold(len(records), cfg.folds, cfg.seed)
    specs = cfg.specs()
    oof, skipped = run_components(records, y, folds, specs, cfg.seed, cfg.threads)
    scored = ~np.isnan(oof["lr"])
    if not scored.any():
        raise ConfigError("every fold was skipped; cannot evaluate")

    gammas = {
        name: _resolve_gamma(getattr(cfg, f"gamma_{name}"), oof[name], y)
        for name in COMPONENT_ORDER
    }
    comp_labels = {
        name: threshold_labels(np.where(scored, oof[name], 0.0), gammas[name])
        for name in COMPONENT_ORDER
    }
    fuse = fuse_majority_labels if cfg.fusion_mode == "majority" else fuse_unanimity_labels
    fused_labels = fuse(comp_labels["lr"], comp_labels["rf"], comp_labels["svm"])

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    combined_rows: list[tuple[str, str, MetricsReport, float | None]] = []
    component_reports: dict[str, MetricsReport] = {}
    for name in COMPONENT_ORDER:
        rows = _sector_rows(sectors, y, comp_labels[name], folds, scored, gammas[name])
        component_reports[name] = rows[-1][1]  # the 'all' row
        combined_rows += [(name, sector, report, gamma) for sector, report, gamma in rows]
        scored_idx = np.flatnonzero(scored)
        curve = roc(oof[name][scored_idx], y[scored_idx])
        write_roc_csv(out_dir / f"roc_{name}.csv", curve)

    fused_rows = _sector_rows(sectors, y, fused_labels, folds, scored, 0.5)
    fused_report = fused_rows[-1][1]
    combined_rows += [
        (f"fused_{cfg.fusion_mode}", sector, report, None)
        for sector, report, _ in fused_rows
    ]
    _write_combined_metrics(out_dir / "metrics.csv", combined_rows)

    triples = [
        TriplePrediction.from_probs(
            float(oof["lr"][i]),
            float(oof["rf"][i]),
            float(oof["svm"][i]),
            BinaryLabel(int(y[i])),
            lr_gamma=gammas["lr"],
            rf_gamma=gammas["rf"],
            svm_gamma=gammas["svm"],
        )
        for i in np.flatnonzero(scored)
    ]
    dynamics = voting_dynamics(triples)
    write_fusion_csv(out_dir / "fusion.csv", dynamics)

    # Descriptive variance curve on the whole feature matrix (reporting only;
    # the per-fold models never see this fit).
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        full_index = build_investor_index(records)
        pca_full = pca_fit(featurize_all(records, full_index), standardize=True)
    write_cumvar_csv(out_dir / "cumvar.csv", pca_full)

    manifest = {
        "config": _config_dict(cfg),
        "resolved_gammas": {k: gammas[k] for k in sorted(gammas)},
        "n_records": len(records),
        "skipped_folds": list(skipped),
        "versions": {
            "exitcast": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return ExperimentResult(
        out_dir=out_dir,
        records=records,
        truths=y,
        folds=folds,
        oof_probs=oof,
        resolved_gammas=gammas,
        component_reports=component_reports,
        fused_report=fused_report,
        fusion_dynamics=dynamics,
        skipped_folds=skipped,
        load_diagnostics=load_diagnostics,
    )


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    if cfg.synth is not None:
        d["synth"] = asdict(cfg.synth)
    # Where the run wrote and how many workers it used do not affect the
    # results, so the manifest stays byte-identical across such choices.
    d.pop("out_dir")
    d.pop("threads")
    return d
