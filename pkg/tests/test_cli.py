import json
from pathlib import Path

import pytest

from synth import build_fixture, match_planted, write_fixture, write_reviews
from warntriage.cli import PipelineConfig, main
from warntriage.datasets import import_corpus
from warntriage.tracking import load_chains


@pytest.fixture(scope="module")
def pipeline_env(tmp_path_factory):
    """Disk fixture plus a reviews file derived from a first tracking pass."""
    root = tmp_path_factory.mktemp("pipeline")
    fx = build_fixture()
    manifest = write_fixture(fx, root / "input")
    out = root / "bootstrap"
    assert main(["ingest", "--manifest", str(manifest), "--out", str(out)]) == 0
    assert main(["track", "--manifest", str(manifest), "--out", str(out)]) == 0
    cfg = PipelineConfig(manifest=manifest, out=out)
    from warntriage.cli import _read_series
    series, _ = _read_series(cfg)
    chains = load_chains(out / "chains.jsonl", series)
    mapping = match_planted(fx, chains)
    reviews = write_reviews(fx, mapping, root / "reviews.jsonl")
    return {"root": root, "manifest": manifest, "reviews": reviews, "fixture": fx}


def run_args(env, out: Path, extra=()):
    return ["run", "--manifest", str(env["manifest"]), "--out", str(out),
            "--reviews", str(env["reviews"]), "--seed", "7",
            "--learning-rate", "0.3", "--epochs", "10", *extra]


ARTIFACTS = ["series.json", "warnings.jsonl", "chains.jsonl", "labels.jsonl",
             "contexts.jsonl", "corpus/train.jsonl", "corpus/validation.jsonl",
             "corpus/test.jsonl", "corpus/manifest.json",
             "scores/native_baseline.jsonl", "reports/eval_reports.json",
             "reports/report.json", "reports/report.txt", "run_manifest.json"]


class TestRunPipeline:
    def test_end_to_end_artifacts(self, pipeline_env):
        out = pipeline_env["root"] / "full"
        assert main(run_args(pipeline_env, out)) == 0
        for artifact in ARTIFACTS:
            assert (out / artifact).exists(), artifact

    def test_corpus_contents_match_plant(self, pipeline_env):
        out = pipeline_env["root"] / "full"
        examples = []
        for part in ("train", "validation", "test"):
            examples.extend(import_corpus(out / "corpus" / f"{part}.jsonl"))
        # 3 actionable + 5 unactionable chains carry labels; the renamed
        # chain has no line info, hence no context, so 7 examples remain
        assert len(examples) == 7
        labels = [e.label.value for e in examples]
        assert labels.count("actionable") == 3
        assert labels.count("unactionable") == 4

    def test_rerun_is_byte_identical(self, pipeline_env):
        out = pipeline_env["root"] / "full"
        before = {a: (out / a).read_bytes() for a in ARTIFACTS}
        assert main(run_args(pipeline_env, out)) == 0
        for artifact in ARTIFACTS:
            assert (out / artifact).read_bytes() == before[artifact], artifact

    def test_downstream_stage_isolation(self, pipeline_env):
        out = pipeline_env["root"] / "full"
        wanted = ["corpus/train.jsonl", "corpus/test.jsonl",
                  "scores/native_baseline.jsonl", "reports/report.json",
                  "reports/report.txt"]
        before = {a: (out / a).read_bytes() for a in wanted}
        for a in wanted:
            (out / a).unlink()
        common = ["--manifest", str(pipeline_env["manifest"]), "--out", str(out),
                  "--reviews", str(pipeline_env["reviews"]), "--seed", "7",
                  "--learning-rate", "0.3", "--epochs", "10"]
        for stage in ("split", "train", "eval", "report"):
            assert main([stage, *common]) == 0
        for a in wanted:
            assert (out / a).read_bytes() == before[a], a


class TestConfigValidation:
    def test_bad_ratios_fail_before_work(self, pipeline_env, tmp_path):
        out = tmp_path / "never"
        code = main(run_args(pipeline_env, out, extra=["--ratios", "0.7/0.1/0.3"]))
        assert code == 1
        assert not out.exists()

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exit_info:
            main(["run", "--bogus"])
        assert exit_info.value.code == 1

    def test_missing_manifest_is_usage_error(self, capsys):
        assert main(["run", "--out", "/tmp/x"]) == 1
        assert "manifest" in capsys.readouterr().err

    def test_out_inside_input_dir_rejected(self, pipeline_env):
        manifest = pipeline_env["manifest"]
        code = main(["run", "--manifest", str(manifest), "--out", str(manifest.parent)])
        assert code == 1

    def test_config_file_with_flag_override(self, pipeline_env, tmp_path):
        doc = {"manifest": str(pipeline_env["manifest"]), "out": str(tmp_path / "cfg_out"),
               "reviews": str(pipeline_env["reviews"]), "ratios": [0.7, 0.1, 0.2],
               "learning_rate": 0.3, "epochs": 5}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(doc))
        assert main(["run", "--config", str(cfg_path), "--seed", "3"]) == 0
        manifest = json.loads((tmp_path / "cfg_out" / "run_manifest.json").read_text())
        assert manifest["config"]["seed"] == 3

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"manifest": "m", "out": "o", "typo_key": 1}))
        assert main(["run", "--config", str(cfg_path)]) == 1

    def test_stage_failure_exit_code(self, pipeline_env, tmp_path):
        # track before ingest: missing series.json is a stage failure
        code = main(["track", "--manifest", str(pipeline_env["manifest"]),
                     "--out", str(tmp_path / "empty_out")])
        assert code == 2


class TestImportScores:
    def test_import_and_eval_external_model(self, pipeline_env, capsys):
        out = pipeline_env["root"] / "full"
        test_examples = import_corpus(out / "corpus" / "test.jsonl")
        score_file = pipeline_env["root"] / "external.jsonl"
        with score_file.open("w") as fh:
            for e in test_examples:
                fh.write(json.dumps({"chain": e.chain_id, "score": 0.5,
                                     "model": "external_stub"}) + "\n")
            fh.write(json.dumps({"chain": "ghost", "score": 0.4, "model": "x"}) + "\n")
            fh.write(json.dumps({"chain": test_examples[0].chain_id, "score": 7.0,
                                 "model": "x"}) + "\n")
        common = ["--manifest", str(pipeline_env["manifest"]), "--out", str(out),
                  "--seed", "7", "--learning-rate", "0.3", "--epochs", "10"]
        assert main(["import-scores", str(score_file), "--model", "external_stub",
                     *common]) == 0
        err = capsys.readouterr().err
        assert "unknown chain id" in err and "outside" in err
        assert (out / "scores" / "external_stub.jsonl").exists()

        assert main(["eval", *common]) == 0
        assert main(["report", *common]) == 0
        doc = json.loads((out / "reports" / "report.json").read_text())
        models = {r["model"] for r in doc["reports"] if r["dataset"] == "main"}
        assert {"native_baseline", "external_stub"} <= models
        # two fully covering models on the main test set produce an overlap
        assert doc["overlaps"], "expected an overlap section"

    def test_import_with_no_valid_records_fails(self, pipeline_env, tmp_path):
        out = pipeline_env["root"] / "full"
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"chain": "ghost", "score": 0.4, "model": "x"}\n')
        code = main(["import-scores", str(bad), "--model", "bad",
                     "--manifest", str(pipeline_env["manifest"]), "--out", str(out)])
        assert code == 2


class TestScenarioAndLadderStages:
    def test_ladder_files_and_reports(self, pipeline_env, tmp_path):
        out = tmp_path / "ladder_out"
        code = main(run_args(pipeline_env, out,
                             extra=["--fractions", "0,0.5,1", "--ratios", "0.5/0/0.5"]))
        assert code == 0
        assert (out / "corpus" / "ladder_000.jsonl").exists()
        assert (out / "corpus" / "ladder_100.jsonl").exists()
        doc = json.loads((out / "reports" / "report.json").read_text())
        ladder_rows = [r for r in doc["reports"] if r["dataset"].startswith("ladder/")]
        assert len(ladder_rows) == 3

    def test_scenarios_with_extra_corpora(self, pipeline_env, tmp_path):
        from test_datasets import corpus as toy_corpus
        from warntriage.datasets import export_corpus
        extra_a = tmp_path / "beta.jsonl"
        extra_b = tmp_path / "gamma.jsonl"
        export_corpus(toy_corpus(30, 6, project="beta"), extra_a)
        export_corpus(toy_corpus(24, 6, project="gamma"), extra_b)
        out = tmp_path / "scen_out"
        code = main(run_args(pipeline_env, out,
                             extra=["--scenario", "all", "--scenario-corpora",
                                    str(extra_a), str(extra_b)]))
        assert code == 0
        scen = json.loads((out / "scenarios" / "manifest.json").read_text())
        assert len(scen["scenarios"]) == 12
        doc = json.loads((out / "reports" / "report.json").read_text())
        scenario_rows = [r for r in doc["reports"]
                         if r["dataset"].split("/")[0].startswith(("within", "cross"))]
        assert len(scenario_rows) == 12


class TestCrossDirDeterminism:
    def test_two_out_dirs_identical_corpora_and_reports(self, pipeline_env, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(run_args(pipeline_env, out_a)) == 0
        assert main(run_args(pipeline_env, out_b)) == 0
        for artifact in ARTIFACTS:
            if artifact == "run_manifest.json":  # embeds the out path
                continue
            assert (out_a / artifact).read_bytes() == (out_b / artifact).read_bytes(), artifact
