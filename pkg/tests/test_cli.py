"""CLI: stage composability, artifact schemas, exit codes, reproducibility."""

import json

import numpy as np
import pytest

from isletnet import cli
from isletnet.config import (ConfigError, RunConfig, config_hash,
                             load_run_config, parse_config_text)
from isletnet.dataset import load_csv_dataset
from isletnet.ensemble import curve_from_csv_rows

FAST_CONFIG = """
# small, fast settings for pipeline tests
seed = 0
min_islet_size = 10
max_epochs = 60
eta = 0.5
neg_ratio = 2.0
knn_k = 3
theta_count = 8
knn_kmax = 5
baseline_epochs = 30
baseline_hidden = 6
folds = 3
"""


@pytest.fixture()
def workdir(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(FAST_CONFIG)
    return tmp_path, str(cfg)


def run_cli(*argv):
    return cli.main(list(argv))


class TestConfig:
    def test_defaults_round_trip(self):
        cfg = load_run_config(None)
        assert cfg == RunConfig()

    def test_parse_and_hash_stability(self):
        cfg1 = parse_config_text("seed = 3\nalpha = 2.0\n")
        cfg2 = parse_config_text("alpha = 2.0\nseed = 3\n")
        assert cfg1 == cfg2
        assert config_hash(cfg1) == config_hash(cfg2)
        assert config_hash(cfg1) != config_hash(RunConfig())

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config_text("seed = 1\nwibble = 2\n")

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            parse_config_text("seed = banana\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("seed = 1\nseed = 2\n")

    def test_module_invariants_enforced(self):
        with pytest.raises(ConfigError):
            parse_config_text("alpha = -1\n")
        with pytest.raises(ConfigError):
            parse_config_text("linkage = ward\n")

    def test_neg_ratio_none(self):
        cfg = parse_config_text("neg_ratio = none\n")
        assert cfg.neg_ratio is None

    def test_baseline_hidden_tuple(self):
        cfg = parse_config_text("baseline_hidden = 50,20\n")
        assert cfg.baseline_hidden == (50, 20)


class TestPipelineStages:
    def test_full_stage_chain(self, workdir):
        tmp, cfg = workdir
        data = tmp / "fig2.csv"
        dendro = tmp / "dendro.json"
        clustering = tmp / "clusters.json"
        islets = tmp / "islets.json"

        assert run_cli("--config", cfg, "synth", "--preset", "fig2",
                       "--seed", "0", "--out", str(data)) == 0
        ds = load_csv_dataset(data)
        assert ds.classes.size == 6

        assert run_cli("--config", cfg, "cluster", "--data", str(data),
                       "--out", str(dendro)) == 0
        doc = json.loads(dendro.read_text())
        assert doc["meta"]["seed"] == 0
        assert len(doc["dendrogram"]["merges"]) == ds.n - 1

        assert run_cli("--config", cfg, "cut", "--dendrogram", str(dendro),
                       "--alpha", "1.0", "--out", str(clustering)) == 0
        doc = json.loads(clustering.read_text())
        assert len(doc["clustering"]["clusters"]) == 6

        assert run_cli("--config", cfg, "islets", "--dendrogram", str(dendro),
                       "--clustering", str(clustering), "--data", str(data),
                       "--out", str(islets)) == 0
        doc = json.loads(islets.read_text())
        assert 0.0 < doc["coverage"] <= 1.0
        assert doc["partition"]["islets"]

    def test_train_classify_curve(self, workdir):
        tmp, cfg = workdir
        train_csv = tmp / "train.csv"
        test_csv = tmp / "test.csv"
        bundle = tmp / "bundle.json"
        queries = tmp / "queries.csv"
        decisions = tmp / "decisions.csv"

        assert run_cli("--config", cfg, "synth", "--seed", "0",
                       "--out", str(train_csv)) == 0
        assert run_cli("--config", cfg, "synth", "--seed", "1",
                       "--out", str(test_csv)) == 0
        assert run_cli("--config", cfg, "train", "--data", str(train_csv),
                       "--out", str(bundle)) == 0
        doc = json.loads(bundle.read_text())
        assert doc["classifier"]["experts"]
        assert doc["baseline"] is not None

        test_ds = load_csv_dataset(test_csv)
        rows = [",".join(repr(float(v)) for v in row)
                for row in test_ds.features[:10]]
        queries.write_text("\n".join(rows) + "\n")
        assert run_cli("--config", cfg, "classify", "--bundle", str(bundle),
                       "--train", str(train_csv), "--queries", str(queries),
                       "--out", str(decisions)) == 0
        lines = [l for l in decisions.read_text().splitlines()
                 if not l.startswith("#")]
        assert lines[0] == "query,label,source"
        assert len(lines) == 11

        out_dir = tmp / "curves"
        assert run_cli("--config", cfg, "curve", "--bundle", str(bundle),
                       "--train", str(train_csv), "--test", str(test_csv),
                       "--out-dir", str(out_dir)) == 0
        for name in ("distributed", "knn", "single_mlp"):
            rows = (out_dir / f"{name}.csv").read_text().splitlines()
            assert rows[0].startswith("# config_hash=")
            curve = curve_from_csv_rows(rows)
            for p in curve:
                assert abs(p.recognition + p.error + p.rejection - 100) <= 1e-9

    def test_crossval_writes_folds_and_average(self, workdir):
        tmp, cfg = workdir
        data = tmp / "fig2.csv"
        out_dir = tmp / "cv"
        assert run_cli("--config", cfg, "synth", "--seed", "0",
                       "--out", str(data)) == 0
        assert run_cli("--config", cfg, "crossval", "--data", str(data),
                       "--out-dir", str(out_dir)) == 0
        for name in ("distributed", "knn", "single_mlp"):
            folds = [curve_from_csv_rows(
                (out_dir / f"fold{i}_{name}.csv").read_text().splitlines())
                for i in range(3)]
            avg = curve_from_csv_rows(
                (out_dir / f"avg_{name}.csv").read_text().splitlines())
            for i, point in enumerate(avg):
                expected = np.mean([f[i].recognition for f in folds])
                assert point.recognition == pytest.approx(expected, abs=1e-9)
                total = point.recognition + point.error + point.rejection
                assert abs(total - 100.0) <= 1e-9

    def test_crossval_byte_identical_rerun(self, workdir):
        tmp, cfg = workdir
        data = tmp / "fig2.csv"
        run_cli("--config", cfg, "synth", "--seed", "0", "--out", str(data))
        out_a = tmp / "cv_a"
        out_b = tmp / "cv_b"
        assert run_cli("--config", cfg, "crossval", "--data", str(data),
                       "--out-dir", str(out_a)) == 0
        assert run_cli("--config", cfg, "crossval", "--data", str(data),
                       "--out-dir", str(out_b)) == 0
        for path_a in sorted(out_a.iterdir()):
            path_b = out_b / path_a.name
            assert path_a.read_bytes() == path_b.read_bytes()


class TestExitCodes:
    def test_missing_data_file(self, workdir):
        tmp, cfg = workdir
        assert run_cli("--config", cfg, "cluster", "--data",
                       str(tmp / "nope.csv"), "--out", str(tmp / "o.json")) == 3

    def test_bad_config(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("mystery_knob = 5\n")
        assert run_cli("--config", str(bad), "synth", "--out",
                       str(tmp_path / "d.csv")) == 2

    def test_unknown_preset(self, tmp_path):
        assert run_cli("synth", "--preset", "fig9",
                       "--out", str(tmp_path / "d.csv")) == 2

    def test_malformed_artifact(self, tmp_path):
        bogus = tmp_path / "bogus.json"
        bogus.write_text("{\"meta\": {}}")
        assert run_cli("cut", "--dendrogram", str(bogus),
                       "--out", str(tmp_path / "o.json")) == 3

    def test_bad_cli_args(self):
        assert run_cli("frobnicate") == 2

    def test_internal_error_code(self, tmp_path, monkeypatch):
        data = tmp_path / "d.csv"
        run_cli("synth", "--seed", "0", "--out", str(data))

        def boom(*args, **kwargs):
            raise RuntimeError("simulated fault")

        monkeypatch.setattr("isletnet.ensemble.build", boom)
        assert run_cli("train", "--data", str(data),
                       "--out", str(tmp_path / "b.json")) == 4

    def test_dimension_mismatch_is_data_error(self, workdir):
        tmp, cfg = workdir
        train_csv = tmp / "train.csv"
        bundle = tmp / "bundle.json"
        run_cli("--config", cfg, "synth", "--seed", "0", "--out", str(train_csv))
        run_cli("--config", cfg, "train", "--data", str(train_csv),
                "--out", str(bundle))
        queries = tmp / "q.csv"
        queries.write_text("1.0,2.0\n")
        assert run_cli("--config", cfg, "classify", "--bundle", str(bundle),
                       "--train", str(train_csv), "--queries", str(queries),
                       "--out", str(tmp / "d.csv")) == 3
