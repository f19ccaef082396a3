"""Config parsing/precedence and the end-to-end command line pipeline."""

from __future__ import annotations

import json

import pytest

from sigmine.cli import main
from sigmine.config import (
    ConfigError,
    build_config,
    config_text,
    read_config_file,
    resolve_min_sup,
)
from sigmine.metrics import read_eval_report
from sigmine.synth import sample_lines

MIX = (
    ("normal", 120),
    ("smurf", 80),
    ("neptune", 60),
    ("portsweep", 25),
    ("ipsweep", 25),
    ("guess_passwd", 20),
    ("warezclient", 15),
    ("buffer_overflow", 8),
    ("rootkit", 4),
)


class TestConfigFile:
    def test_parses_keys_comments_and_blanks(self, tmp_path):
        path = tmp_path / "sigmine.conf"
        path.write_text("# pipeline\n\nseed = 42\n  bins=6  \n", encoding="utf-8")
        assert read_config_file(path) == {"seed": "42", "bins": "6"}

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "c"
        path.write_text("seed = 1\nseed = 2\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="duplicate key 'seed'"):
            read_config_file(path)

    def test_line_without_equals_rejected(self, tmp_path):
        path = tmp_path / "c"
        path.write_text("seed\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="line 1"):
            read_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            read_config_file(tmp_path / "absent.conf")


class TestBuildConfig:
    def test_defaults(self):
        cfg = build_config()
        assert cfg.kdd_path == "synth"
        assert cfg.seed == 7
        assert cfg.train_fraction == 0.7
        assert cfg.bins == 4
        assert cfg.boost_rounds == 10
        assert cfg.min_sup == 0.02
        assert cfg.min_conf == 0.8
        assert cfg.max_len == 2
        assert cfg.category_max_depth is None
        assert cfg.consequent_filter is True
        assert cfg.workers == 1

    def test_precedence_file_then_overrides(self):
        cfg = build_config({"seed": "1", "bins": "8"}, {"seed": "2"})
        assert cfg.seed == 2  # override beats file
        assert cfg.bins == 8  # file beats default
        assert cfg.boost_rounds == 10  # default survives

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key 'sead'"):
            build_config({"sead": "1"})

    def test_problems_aggregate_sorted(self):
        with pytest.raises(ConfigError) as err:
            build_config({"zzz": "1", "bins": "zero", "train_fraction": "1.5"})
        msg = str(err.value)
        assert "bins:" in msg and "train_fraction:" in msg and "unknown key" in msg
        parts = msg.split("; ")
        assert parts == sorted(parts)

    def test_min_sup_forms(self):
        assert build_config({"min_sup": "0.5"}).min_sup == 0.5
        assert build_config({"min_sup": "15"}).min_sup == 15
        assert isinstance(build_config({"min_sup": "15"}).min_sup, int)
        for bad in ("0", "-3", "1.5", "abc"):
            with pytest.raises(ConfigError, match="min_sup"):
                build_config({"min_sup": bad})

    def test_typed_parsing(self):
        cfg = build_config(
            {
                "write_transactions": "yes",
                "category_max_depth": "3",
                "max_len": "none",
                "unknown_label": "Probe",
            }
        )
        assert cfg.write_transactions is True
        assert cfg.category_max_depth == 3
        assert cfg.max_len is None
        assert cfg.unknown_label == "Probe"

    def test_range_checks(self):
        for key, bad in (
            ("train_fraction", "0"),
            ("train_fraction", "1"),
            ("bins", "0"),
            ("min_conf", "0"),
            ("min_conf", "1.2"),
            ("ablate_fraction", "2"),
            ("workers", "0"),
            ("mine_source", "everything"),
        ):
            with pytest.raises(ConfigError, match=key):
                build_config({key: bad})

    def test_config_text_round_trips(self, tmp_path):
        cfg = build_config({}, {"min_sup": "25", "max_len": "none", "workers": "3"})
        path = tmp_path / "echo.conf"
        path.write_text(config_text(cfg), encoding="utf-8")
        assert build_config(read_config_file(path)) == cfg


class TestResolveMinSup:
    def test_absolute_passthrough(self):
        assert resolve_min_sup(191, 10) == 191

    def test_fraction_ceils(self):
        assert resolve_min_sup(0.02, 9524) == 191
        assert resolve_min_sup(0.5, 3) == 2

    def test_fraction_floor_of_one(self):
        assert resolve_min_sup(0.001, 5) == 1


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    """A small capture file plus an output directory with every pipeline
    stage already run against it (flags given before the subcommand)."""
    mp = pytest.MonkeyPatch()
    mp.delenv("SIGMINE_KDD_PATH", raising=False)
    root = tmp_path_factory.mktemp("cli")
    csv = root / "capture.csv"
    csv.write_text("\n".join(sample_lines(seed=11, mix=MIX)) + "\n", encoding="utf-8")
    out = root / "out"
    base = [
        "--kdd-path", str(csv),
        "--out", str(out),
        "--seed", "3",
        "--boost-rounds", "4",
        "--min-sup", "0.05",
    ]
    for stage in ("ingest", "train", "mine", "export", "detect", "evade"):
        extra = ["--write-transactions", "true"] if stage == "ingest" else []
        code = main(base + extra + [stage])
        assert code == 0, f"stage {stage} failed"
    yield {"csv": csv, "out": out, "base": base, "root": root}
    mp.undo()


class TestPipelineCli:
    def test_ingest_artifacts(self, cli_env):
        out = cli_env["out"]
        summary = (out / "summary.tsv").read_text(encoding="utf-8")
        assert "total\t357" in summary
        assert "smurf\t80" in summary
        schema = json.loads((out / "schema.json").read_text(encoding="utf-8"))
        assert len(schema["features"]) == 41
        assert (out / "transactions.txt").stat().st_size > 0

    def test_train_artifacts(self, cli_env):
        out = cli_env["out"]
        model = json.loads((out / "model.json").read_text(encoding="utf-8"))
        assert len(model["rounds"]) >= 1
        log = (out / "training_log.tsv").read_text(encoding="utf-8").splitlines()
        assert log[0] == "t\tepsilon\talpha\ttraining_error"
        assert len(log) == len(model["rounds"]) + 1
        assert (out / "category_model.json").exists()

    def test_mine_artifacts(self, cli_env):
        out = cli_env["out"]
        assert (out / "itemsets.tsv").read_text(encoding="utf-8").strip()
        assert (out / "rules.tsv").read_text(encoding="utf-8").strip()
        cuts = json.loads((out / "cuts.json").read_text(encoding="utf-8"))
        assert cuts["src_bytes"][0] == "0"
        assert cuts["src_bytes"][-1] == "inf"

    def test_export_artifacts(self, cli_env):
        lines = (cli_env["out"] / "local.rules").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# sigmine-ruleset v1"
        assert any(line.startswith("alert ip ") for line in lines)

    def test_detect_artifacts(self, cli_env):
        out = cli_env["out"]
        for source in ("rules", "classifier"):
            report = read_eval_report(out / f"report_{source}.json")
            assert report.source == source
            assert 0.0 <= report.detection_rate <= 1.0
            assert 0.0 <= report.false_alarm_rate <= 1.0
            verdicts = (out / f"verdicts_{source}.tsv").read_text(encoding="utf-8")
            assert len(verdicts.splitlines()) == report.n_records

    def test_evade_artifacts(self, cli_env):
        out = cli_env["out"]
        evj = json.loads((out / "evasion.json").read_text(encoding="utf-8"))
        assert evj["attempted"] >= evj["evaded"] >= 0
        mutated = (out / "mutated.csv").read_text(encoding="utf-8").splitlines()
        report = read_eval_report(out / "report_rules.json")
        assert len(mutated) == report.n_records
        assert read_eval_report(out / "report_rules_mutated.json").source == "rules_mutated"

    def test_report_prints_comparison(self, cli_env, capsys):
        assert main(cli_env["base"] + ["report"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].startswith("source\tn_records\t")
        table = (cli_env["out"] / "comparison.tsv").read_text(encoding="utf-8")
        assert out == table
        assert "classifier\t" in table and "rules\t" in table

    def test_flags_after_subcommand(self, cli_env, tmp_path):
        out2 = tmp_path / "after"
        code = main(
            ["ingest", "--kdd-path", str(cli_env["csv"]), "--out", str(out2),
             "--seed", "3"]
        )
        assert code == 0
        assert (out2 / "summary.tsv").read_text(encoding="utf-8") == (
            cli_env["out"] / "summary.tsv"
        ).read_text(encoding="utf-8")

    def test_config_file_feeds_the_cli(self, cli_env, tmp_path):
        conf_out = tmp_path / "from_conf"
        conf = tmp_path / "sigmine.conf"
        conf.write_text(
            f"kdd_path = {cli_env['csv']}\nout_dir = {conf_out}\n",
            encoding="utf-8",
        )
        assert main(["--config", str(conf), "ingest"]) == 0
        assert (conf_out / "summary.tsv").exists()

    def test_flag_overrides_config_file(self, cli_env, tmp_path):
        ignored = tmp_path / "ignored"
        used = tmp_path / "used"
        conf = tmp_path / "sigmine.conf"
        conf.write_text(
            f"kdd_path = {cli_env['csv']}\nout_dir = {ignored}\n", encoding="utf-8"
        )
        assert main(["--config", str(conf), "--out", str(used), "ingest"]) == 0
        assert (used / "summary.tsv").exists()
        assert not ignored.exists()

    def test_detector_choice_limits_outputs(self, cli_env, tmp_path):
        out2 = tmp_path / "solo"
        base = ["--kdd-path", str(cli_env["csv"]), "--out", str(out2), "--seed", "3",
                "--boost-rounds", "4"]
        assert main(base + ["train"]) == 0
        assert main(base + ["detect", "--detector", "classifier"]) == 0
        assert (out2 / "report_classifier.json").exists()
        assert not (out2 / "report_rules.json").exists()


class TestCliFailure:
    def test_bad_config_value_is_exit_2(self, capsys):
        assert main(["--bins", "0", "ingest"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_unknown_config_key_is_exit_2(self, tmp_path, capsys):
        conf = tmp_path / "c"
        conf.write_text("no_such_key = 1\n", encoding="utf-8")
        assert main(["--config", str(conf), "ingest"]) == 2
        assert "unknown key" in capsys.readouterr().err

    def test_malformed_data_is_exit_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2,3\n", encoding="utf-8")
        out = tmp_path / "out"
        assert main(["--kdd-path", str(bad), "--out", str(out), "ingest"]) == 3
        assert "parse error" in capsys.readouterr().err

    def test_missing_upstream_artifacts_are_exit_4(self, cli_env, tmp_path, capsys):
        fresh = tmp_path / "fresh"
        base = ["--kdd-path", str(cli_env["csv"]), "--out", str(fresh)]
        assert main(base + ["export"]) == 4
        assert "run `sigmine mine` first" in capsys.readouterr().err
        assert main(base + ["detect", "--detector", "rules"]) == 4
        assert main(base + ["mine"]) == 4  # flagged source needs the model
        assert main(base + ["report"]) == 4

    def test_empty_mining_result_still_flows(self, cli_env, tmp_path):
        out = tmp_path / "empty"
        base = ["--kdd-path", str(cli_env["csv"]), "--out", str(out), "--seed", "3",
                "--boost-rounds", "4"]
        assert main(base + ["train"]) == 0
        assert main(base + ["--min-sup", "100000", "mine"]) == 0
        assert (out / "rules.tsv").read_text(encoding="utf-8") == ""
        assert main(base + ["export"]) == 0
        lines = (out / "local.rules").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# sigmine-ruleset v1"
        assert not any(line.startswith("alert") for line in lines)
        assert main(base + ["detect", "--detector", "rules"]) == 0
        report = read_eval_report(out / "report_rules.json")
        assert report.detection_rate == 0.0
        assert report.false_alarm_rate == 0.0
