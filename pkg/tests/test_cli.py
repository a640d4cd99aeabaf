import json

import pytest

from fairpsl.cli import WORKDIR_ENV, build_parser, main, resolve_config


@pytest.fixture(scope="module")
def prepared(synthetic_ml, tmp_path_factory):
    work = tmp_path_factory.mktemp("work")
    assert main(["prepare", "--data-dir", str(synthetic_ml), "--work-dir", str(work), "--subsample", "60"]) == 0
    return synthetic_ml, work


def args(prepared, *extra):
    data, work = prepared
    return ["--data-dir", str(data), "--work-dir", str(work), "--subsample", "60", *extra]


class TestPrepare:
    def test_prints_counts(self, synthetic_ml, tmp_path, capsys):
        assert main(["prepare", "--data-dir", str(synthetic_ml), "--work-dir", str(tmp_path)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert [line.split("\t")[0] for line in lines[:3]] == ["ratings", "movies", "users"]
        assert (tmp_path / "prepared" / "folds.tsv").exists()

    def test_missing_data_dir(self, tmp_path, capsys):
        assert main(["prepare", "--data-dir", str(tmp_path / "nope"), "--work-dir", str(tmp_path)]) == 2
        assert "does not exist" in capsys.readouterr().err

    def test_strict_counts_mismatch(self, synthetic_ml, tmp_path):
        assert main(["prepare", "--strict-counts", "--data-dir", str(synthetic_ml),
                     "--work-dir", str(tmp_path)]) == 2

    def test_subsample_caps_users(self, prepared):
        users = (prepared[1] / "prepared" / "users.tsv").read_text().splitlines()
        assert len(users) - 1 <= 60


class TestSimilarity:
    def test_mc_writes_nothing(self, prepared):
        assert main(["similarity", *args(prepared, "--variant", "MC")]) == 0
        assert not (prepared[1] / "similarity").exists()

    def test_mc_cf_writes_three_per_fold_and_reruns_are_noops(self, prepared):
        sim = prepared[1] / "similarity"
        assert main(["similarity", *args(prepared, "--variant", "MC_CF", "--k", "5")]) == 0
        caches = sorted(sim.glob("*.txt"))
        assert len(caches) == 3 * 5
        stamps = {p: p.stat().st_mtime_ns for p in caches}
        assert main(["similarity", *args(prepared, "--variant", "MC_CF", "--k", "5")]) == 0
        assert {p: p.stat().st_mtime_ns for p in caches} == stamps


class TestRun:
    def test_outputs_and_determinism(self, prepared):
        work = prepared[1]
        assert main(["run", "--fold", "0", *args(prepared, "--variant", "MC")]) == 0
        pred = work / "runs" / "MC" / "fold0" / "predictions.tsv"
        first = pred.read_bytes()
        assert first.startswith(b"user\tmovie\tpredicted\n")
        assert main(["run", "--fold", "0", *args(prepared, "--variant", "MC")]) == 0
        assert pred.read_bytes() == first

    def test_fair_adds_latent_variables(self, prepared):
        work = prepared[1]
        assert main(["run", "--fold", "1", *args(prepared, "--variant", "MC")]) == 0
        assert main(["run", "--fold", "1", *args(prepared, "--variant", "MC", "--fair")]) == 0
        base = json.loads((work / "runs" / "MC" / "fold1" / "report.json").read_text())
        fair = json.loads((work / "runs" / "Fair_MC" / "fold1" / "report.json").read_text())
        assert fair["variables"] > base["variables"]
        assert fair["templates"] > base["templates"]

    def test_non_convergence(self, prepared):
        work = prepared[1]
        extra = ("--variant", "MC", "--max-iterations", "2", "--work-dir", str(work / "nc"))
        assert main(["run", "--fold", "2", *args(prepared, *extra)]) == 2  # nothing prepared under nc
        assert main(["run", "--fold", "2", *args(prepared, "--variant", "MC", "--max-iterations", "2")]) == 0
        report = json.loads((work / "runs" / "MC" / "fold2" / "report.json").read_text())
        assert report["converged"] is False
        assert (work / "runs" / "MC" / "fold2" / "predictions.tsv").exists()
        assert main(["run", "--fold", "2", "--strict",
                     *args(prepared, "--variant", "MC", "--max-iterations", "2")]) == 3

    def test_bad_fold(self, prepared):
        assert main(["run", "--fold", "9", *args(prepared, "--variant", "MC")]) == 1


class TestEvaluate:
    def test_missing_fold_named(self, prepared, capsys):
        assert main(["evaluate", *args(prepared, "--variant", "MC_CF_DC")]) == 2
        assert "fold 0" in capsys.readouterr().err

    def test_cv_writes_reports(self, prepared, capsys):
        assert main(["cv", *args(prepared, "--variant", "MC_CF", "--k", "5")]) == 0
        out = capsys.readouterr().out
        assert "MC_CF" in out and "RMSE" in out
        reports = prepared[1] / "reports"
        assert (reports / "MC_CF.table.txt").read_text() in out
        rows = (reports / "MC_CF.metrics.tsv").read_text().splitlines()
        assert rows[0] == "model\tmetric\tfold\tvalue"
        assert len(rows) == 1 + 5 * 8 + 2 * 8


def parse(*argv):
    return resolve_config(build_parser().parse_args(list(argv)))


class TestConfig:
    def test_precedence(self, tmp_path, monkeypatch):
        ini = tmp_path / "exp.ini"
        ini.write_text("[experiment]\nwork_dir = from-file\nk = 7\nfair = yes\n"
                       "[weights]\nneg_prior = 0.3\n[fairness]\ncoupling_weight = 100\n")
        monkeypatch.setenv(WORKDIR_ENV, "from-env")
        cfg = parse("cv", "--config", str(ini), "--k", "9")
        assert cfg.work_dir == "from-file" and cfg.k == 9 and cfg.fair
        assert cfg.model_spec().weights["neg_prior"] == 0.3
        assert cfg.fairness_spec().coupling_weight == 100
        assert parse("cv", "--config", str(ini), "--work-dir", "cli").work_dir == "cli"

    def test_env_workdir(self, monkeypatch):
        monkeypatch.setenv(WORKDIR_ENV, "/tmp/envwork")
        assert parse("cv").work_dir == "/tmp/envwork"

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv(WORKDIR_ENV, raising=False)
        cfg = parse("cv")
        assert (cfg.k, cfg.seed, cfg.folds, cfg.fair) == (20, 42, 5, False)

    @pytest.mark.parametrize("argv", [
        ["cv", "--weight", "nonsense=1"],
        ["cv", "--weight", "neg_prior"],
        ["cv", "--k", "0"],
        ["cv", "--fairness-opt", "color=red"],
        ["cv", "--variant", "XYZ"],
        ["frobnicate"],
    ])
    def test_usage_errors(self, argv, tmp_path):
        assert main(argv + ["--work-dir", str(tmp_path)] if argv[0] == "cv" else argv) == 1

    def test_weight_grid(self, prepared, capsys):
        assert main(["weight-grid", "--grid", "neg_prior=0,0.5", *args(prepared, "--variant", "MC")]) == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("neg_prior=")]
        assert len(lines) == 2
