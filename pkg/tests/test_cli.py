import json
from pathlib import Path

import numpy as np
import pytest

from exitcast.cli import main
from exitcast.evaluation import read_metrics_csv, read_roc_csv
from exitcast.experiment import ARTIFACT_NAMES
from exitcast.fusion import read_fusion_csv
from exitcast.ingest import load_csv


RUN_ARGS = [
    "--n", "600", "--seed", "7", "--folds", "4",
    "--trees", "12", "--min-node", "25", "--svm-max-train", "300",
]


def run_cli(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def records_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "records.csv"
    assert run_cli("synth", "--n", "600", "--seed", "3", "--out", path) == 0
    return path


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "out"
    assert run_cli("run", *RUN_ARGS, "--out", out) == 0
    return out


class TestSynth:
    def test_output_is_loadable(self, records_csv):
        result = load_csv(records_csv)
        assert len(result.records) == 600
        assert result.n_rejected == 0


class TestRun:
    def test_artifact_inventory(self, finished_run):
        names = sorted(p.name for p in finished_run.iterdir())
        assert names == sorted(ARTIFACT_NAMES + ("manifest.json",))

    def test_manifest_records_seed_and_versions(self, finished_run):
        manifest = json.loads((finished_run / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 7
        assert manifest["config"]["synth"]["n_companies"] == 600
        assert "numpy" in manifest["versions"]
        assert manifest["resolved_gammas"] == {"lr": 0.5, "rf": 0.5, "svm": 0.5}

    def test_outputs_reparse(self, finished_run):
        curve = read_roc_csv(finished_run / "roc_lr.csv")
        assert len(curve) == 19
        report = read_fusion_csv(finished_run / "fusion.csv")
        assert report.ar is not None and 0.0 <= report.ar <= 1.0
        header = (finished_run / "metrics.csv").read_text().splitlines()[0]
        assert header == "component,sector,prec_pos,recl_pos,prec_neg,recl_neg,accuracy,gamma"
        from exitcast.pca import read_cumvar_csv

        eigenvalues, cum = read_cumvar_csv(finished_run / "cumvar.csv")
        assert len(eigenvalues) == 19
        assert cum[-1] == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.diff(cum) >= -1e-12)

    def test_reruns_are_byte_identical(self, finished_run, tmp_path):
        again = tmp_path / "again"
        assert run_cli("run", *RUN_ARGS, "--out", again) == 0
        for name in ARTIFACT_NAMES + ("manifest.json",):
            assert (again / name).read_bytes() == (finished_run / name).read_bytes()

    def test_parallel_matches_serial(self, finished_run, tmp_path):
        threaded = tmp_path / "threaded"
        assert run_cli("run", *RUN_ARGS, "--out", threaded, "--threads", "2") == 0
        for name in ARTIFACT_NAMES + ("manifest.json",):
            assert (threaded / name).read_bytes() == (finished_run / name).read_bytes()

    def test_unanimity_never_lowers_negative_recall(self, finished_run, tmp_path):
        unanimous = tmp_path / "unanimous"
        assert run_cli("run", *RUN_ARGS, "--out", unanimous, "--fusion", "unanimity") == 0
        majority_rows = {
            (component, sector): report
            for component, sector, report in _combined_rows(finished_run / "metrics.csv")
        }
        unanimity_rows = {
            (component, sector): report
            for component, sector, report in _combined_rows(unanimous / "metrics.csv")
        }
        maj = majority_rows[("fused_majority", "all")]
        una = unanimity_rows[("fused_unanimity", "all")]
        assert una.recl_neg >= maj.recl_neg

    def test_knee_gamma_resolves(self, tmp_path):
        out = tmp_path / "knee"
        assert run_cli(
            "run", "--n", "400", "--seed", "1", "--folds", "3", "--trees", "8",
            "--min-node", "30", "--svm-max-train", "200",
            "--gamma-lr", "knee", "--out", out,
        ) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        g = manifest["resolved_gammas"]["lr"]
        assert 0.05 <= g <= 0.95
        assert manifest["config"]["gamma_lr"] == "knee"


def _combined_rows(path):
    from exitcast.evaluation import METRIC_FIELDS, MetricsReport

    rows = []
    lines = Path(path).read_text().splitlines()
    for line in lines[1:]:
        parts = line.split(",")
        values = [None if v == "NA" else float(v) for v in parts[2:7]]
        rows.append((parts[0], parts[1], MetricsReport(**dict(zip(METRIC_FIELDS, values)))))
    return rows


class TestConfigFile:
    def test_file_values_and_flag_override(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text(
            "[experiment]\nseed = 9\nfolds = 3\n"
            "[synthetic]\nn = 300\n"
            "[forest]\ntrees = 6\nmin_node = 30\n"
            "[svm]\nmax_train = 150\n"
        )
        out = tmp_path / "from_file"
        assert run_cli("run", "--config", ini, "--out", out) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 9
        assert manifest["config"]["folds"] == 3
        assert manifest["config"]["trees"] == 6

        out2 = tmp_path / "overridden"
        assert run_cli("run", "--config", ini, "--seed", "21", "--out", out2) == 0
        manifest2 = json.loads((out2 / "manifest.json").read_text())
        assert manifest2["config"]["seed"] == 21


class TestExitCodes:
    def test_missing_input_file_is_io_error(self, tmp_path):
        assert run_cli("run", "--input", tmp_path / "absent.csv", "--out", tmp_path / "o") == 2

    def test_both_sources_is_config_error(self, records_csv, tmp_path):
        code = run_cli(
            "run", "--input", records_csv, "--n", "100", "--out", tmp_path / "o"
        )
        assert code == 1

    def test_unknown_flag_is_config_error(self):
        assert run_cli("run", "--frobnicate") == 1

    def test_bad_gamma_is_config_error(self, tmp_path):
        assert run_cli("run", "--n", "100", "--gamma-lr", "1.5", "--out", tmp_path / "o") == 1

    def test_report_on_missing_dir_is_io_error(self, tmp_path):
        assert run_cli("report", "--dir", tmp_path / "nothing") == 2

    def test_help_exits_zero(self, capsys):
        assert run_cli("--help") == 0
        assert "exit-outcome" in capsys.readouterr().out.lower()


class TestOtherCommands:
    def test_features_export(self, records_csv, tmp_path):
        out = tmp_path / "features.csv"
        assert run_cli("features", "--input", records_csv, "--out", out) == 0
        from exitcast.features import read_feature_csv

        X, y = read_feature_csv(out)
        assert X.shape == (600, 19)
        assert set(np.unique(y)) <= {0, 1}

    def test_train_each_model(self, records_csv, tmp_path):
        for model, extra in [
            ("lr", []),
            ("rf", ["--trees", "5", "--min-node", "30"]),
            ("svm", ["--pca-k", "4"]),
        ]:
            out = tmp_path / f"model.{model}"
            assert run_cli("train", "--model", model, "--input", records_csv, "--out", out, *extra) == 0
            assert out.exists()
        assert (tmp_path / "model.svm.pca").exists()

    def test_eval_writes_sector_table(self, records_csv, tmp_path):
        out = tmp_path / "metrics_lr.csv"
        assert run_cli(
            "eval", "--model", "lr", "--input", records_csv,
            "--folds", "3", "--gamma", "0.5", "--out", out,
        ) == 0
        rows = read_metrics_csv(out)
        assert [r[0] for r in rows] == [str(s) for s in range(1, 10)] + ["all"]
        assert rows[-1][1].accuracy is not None

    def test_roc_command(self, records_csv, tmp_path):
        out = tmp_path / "roc.csv"
        assert run_cli(
            "roc", "--model", "lr", "--input", records_csv, "--folds", "3", "--out", out
        ) == 0
        assert len(read_roc_csv(out)) == 19

    def test_tune_svm_command(self, records_csv, tmp_path):
        out = tmp_path / "tune.csv"
        code = run_cli(
            "tune-svm", "--input", records_csv, "--sessions", "2",
            "--session-size", "80", "--cv-folds", "2", "--pca-k", "3", "--out", out,
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "session,cost,alpha"
        assert len(lines) == 3

    def test_report_prints_tables(self, finished_run, capsys):
        assert run_cli("report", "--dir", finished_run) == 0
        printed = capsys.readouterr().out
        assert "component,sector" in printed
        assert "ar,tari" in printed

    def test_fuse_alias(self, tmp_path):
        out = tmp_path / "fused"
        assert run_cli(
            "fuse", "--n", "300", "--seed", "2", "--folds", "3", "--trees", "6",
            "--min-node", "30", "--svm-max-train", "150", "--out", out,
        ) == 0
        assert (out / "fusion.csv").exists()
