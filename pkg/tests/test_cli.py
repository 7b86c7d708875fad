"""Tests for skeletonizer.cli: argument parsing, subcommands, exit codes."""

import argparse
import csv
import json

import pytest


def _rows(path):
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestParseTemps:
    def test_inclusive_range(self):
        from skeletonizer.cli import parse_temps

        assert parse_temps("2.1:2.4:0.1") == [2.1, 2.2, 2.3, 2.4]
        assert parse_temps("1:1:0.5") == [1.0]

    def test_list(self):
        from skeletonizer.cli import parse_temps

        assert parse_temps("1.5, 2.0,3") == [1.5, 2.0, 3.0]

    @pytest.mark.parametrize("text", ["", "a,b", "3:1:0.5", "1:2:0", "1:2", "0,1", "-1", "inf"])
    def test_rejects(self, text):
        from skeletonizer.cli import parse_temps

        with pytest.raises(argparse.ArgumentTypeError):
            parse_temps(text)

    def test_non_positive_temperature_is_usage_error(self, tmp_path):
        from skeletonizer.cli import main

        with pytest.raises(SystemExit) as exc:
            main(["free-energy", "--L", "2", "--temps", "0", "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestMain:
    def test_no_command(self, capsys):
        from skeletonizer.cli import main

        assert main([]) == 2
        assert "free-energy" in capsys.readouterr().out

    def test_manifest_and_subcommand_conflict(self, tmp_path, capsys):
        from skeletonizer.cli import main

        assert main(["--manifest", str(tmp_path / "x.json"), "selftest"]) == 2
        assert "[error]" in capsys.readouterr().err

    def test_missing_manifest(self, tmp_path):
        from skeletonizer.cli import main

        assert main(["--manifest", str(tmp_path / "missing.json")]) == 2

    def test_bad_threads(self, tmp_path):
        from skeletonizer.cli import main

        assert main(["free-energy", "--L", "2", "--temps", "2", "--threads", "0", "--out", str(tmp_path)]) == 2


class TestFreeEnergy:
    def test_check_brute(self, tmp_path, capsys):
        from skeletonizer.cli import main

        code = main(["free-energy", "--L", "2", "--chi", "16", "--temps", "3.33", "--check-brute", "--out", str(tmp_path)])
        assert code == 0
        (row,) = _rows(tmp_path / "free-energy.csv")
        assert float(row["delta_brute"]) <= 1e-8
        assert row["chi"] == "16"
        assert float(row["delta_f"]) < 1.0
        manifest = json.loads((tmp_path / "free-energy.json").read_text(encoding="utf-8"))
        assert manifest["command"] == "free-energy"
        assert manifest["config"]["tns"]["chi"] == 16
        assert manifest["rows"][0]["T"] == 3.33
        assert (tmp_path / "metrics.jsonl").exists()
        assert "wrote" in capsys.readouterr().out

    def test_check_brute_refuses_large_lattice(self, tmp_path, capsys):
        from skeletonizer.cli import main

        assert main(["free-energy", "--L", "3", "--temps", "3", "--check-brute", "--out", str(tmp_path)]) == 2
        assert "brute" in capsys.readouterr().err

    def test_config_file_and_flag_precedence(self, tmp_path):
        from skeletonizer.cli import main

        cfg = tmp_path / "tns.json"
        cfg.write_text(json.dumps({"chi": 8, "variant": "standard", "unknown": 1}), encoding="utf-8")
        out = tmp_path / "a"
        assert main(["free-energy", "--L", "2", "--temps", "3", "--config", str(cfg), "--out", str(out)]) == 0
        tns = json.loads((out / "free-energy.json").read_text(encoding="utf-8"))["config"]["tns"]
        assert (tns["chi"], tns["variant"]) == (8, "standard")

        out = tmp_path / "b"
        assert main(["free-energy", "--L", "2", "--temps", "3", "--config", str(cfg), "--chi", "2", "--out", str(out)]) == 0
        assert _rows(out / "free-energy.csv")[0]["chi"] == "2"

    @pytest.mark.parametrize("content", ["[1, 2]", "{not json", '{"chi": 0}', '{"mid_bond": 2}'])
    def test_bad_config_file(self, tmp_path, content):
        from skeletonizer.cli import main

        cfg = tmp_path / "tns.json"
        cfg.write_text(content, encoding="utf-8")
        assert main(["free-energy", "--L", "2", "--temps", "3", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_output_dir_from_env(self, out_dir):
        from skeletonizer.cli import main

        assert main(["free-energy", "--L", "1", "--temps", "2"]) == 0
        assert (out_dir / "free-energy.csv").exists()

    def test_manifest_rerun(self, tmp_path):
        from skeletonizer.cli import main

        assert main(["free-energy", "--L", "2", "--chi", "16", "--temps", "2.5,3", "--out", str(tmp_path)]) == 0
        first = _rows(tmp_path / "free-energy.csv")
        assert main(["--manifest", str(tmp_path / "free-energy.json")]) == 0
        second = _rows(tmp_path / "free-energy.csv")
        assert [r["log_Z"] for r in first] == [r["log_Z"] for r in second]

    def test_seed_sets_als_seed(self, tmp_path):
        from skeletonizer.cli import main

        assert main(["free-energy", "--L", "2", "--chi", "2", "--temps", "2.3", "--seed", "7", "--out", str(tmp_path)]) == 0
        manifest = json.loads((tmp_path / "free-energy.json").read_text(encoding="utf-8"))
        assert manifest["seeds"]["als_seed"] == 7
        assert manifest["config"]["settings"]["als_seed"] == 7
        assert manifest["config"]["tns"]["als"]["rng_seed"] == 7

    def test_negative_seed_is_usage_error(self, tmp_path):
        from skeletonizer.cli import main

        assert main(["free-energy", "--L", "2", "--temps", "2.3", "--seed", "-1", "--out", str(tmp_path)]) == 2

    def test_rerun_rows_differ_only_in_timing(self, tmp_path):
        from skeletonizer.cli import main

        for name in ("a", "b"):
            assert main(["free-energy", "--L", "2", "--chi", "2", "--temps", "2.3,3", "--out", str(tmp_path / name)]) == 0
        first, second = (_rows(tmp_path / name / "free-energy.csv") for name in ("a", "b"))
        for row in first + second:
            del row["seconds_per_iteration"]
        assert first == second

    def test_resource_limit_exit_code(self, tmp_path, monkeypatch, capsys):
        from skeletonizer.cli import main

        monkeypatch.setenv("TNS_MAX_INTERMEDIATE", "16")
        monkeypatch.setenv("TNS_CHI", "2")
        assert main(["free-energy", "--L", "2", "--temps", "2", "--out", str(tmp_path)]) == 1
        assert "ResourceLimitError" in capsys.readouterr().err


class TestObservables:
    def test_runs(self, tmp_path):
        from skeletonizer.cli import main

        assert main(["observables", "--L", "2", "--chi", "16", "--temps", "2.0", "--out", str(tmp_path)]) == 0
        (row,) = _rows(tmp_path / "observables.csv")
        assert float(row["u_tns"]) < 0
        assert float(row["u_exact"]) < 0
        assert float(row["field"]) == pytest.approx(1e-5)

    def test_field_must_be_positive(self, tmp_path):
        from skeletonizer.cli import main

        assert main(["observables", "--L", "2", "--temps", "2.0", "--field", "0", "--out", str(tmp_path)]) == 2


class TestDisorder:
    ARGS = ["disorder", "--L", "2", "--chi", "4", "--temps", "1.0", "--realizations", "2", "--seed", "1"]

    def test_rerun_is_identical(self, tmp_path, capsys):
        from skeletonizer.cli import main

        assert main(self.ARGS + ["--out", str(tmp_path / "a")]) == 0
        assert main(self.ARGS + ["--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a" / "disorder.csv").read_bytes()
        assert a == (tmp_path / "b" / "disorder.csv").read_bytes()
        rows = _rows(tmp_path / "a" / "disorder.csv")
        assert [r["seed"] for r in rows] == ["1", "2"]
        assert all(0.0 <= float(r["q"]) <= 1.0 for r in rows)
        manifest = json.loads((tmp_path / "a" / "disorder.json").read_text(encoding="utf-8"))
        assert manifest["seeds"]["seeds"] == [1, 2]
        assert manifest["summary"]["realizations"] == 2
        assert "q_mean@T=1" in manifest["summary"]
        assert "Ensemble" in capsys.readouterr().out

    def test_saved_realization_reloads(self, tmp_path):
        from skeletonizer.cli import main

        assert main(self.ARGS + ["--out", str(tmp_path / "a")]) == 0
        saved = tmp_path / "a" / "realizations" / "seed_2.json"
        assert saved.exists()
        assert main(["disorder", "--temps", "1.0", "--chi", "4", "--realization", str(saved), "--out", str(tmp_path / "b")]) == 0
        (row,) = _rows(tmp_path / "b" / "disorder.csv")
        original = [r for r in _rows(tmp_path / "a" / "disorder.csv") if r["seed"] == "2"][0]
        assert row["seed"] == "2"
        assert float(row["log_Z"]) == pytest.approx(float(original["log_Z"]), rel=1e-12)
        assert not (tmp_path / "b" / "realizations").exists()

    def test_gauge_and_brute_check(self, tmp_path):
        from skeletonizer.cli import main

        args = self.ARGS + ["--gauge-seed", "9", "--check-brute", "--field", "0.1", "--out", str(tmp_path)]
        assert main(args) == 0
        assert all(float(r["delta_brute"]) <= 1e-8 for r in _rows(tmp_path / "disorder.csv"))

    def test_ferro_and_realization_conflict(self, tmp_path):
        from skeletonizer.cli import main

        args = ["disorder", "--temps", "1.0", "--ferro", "--realization", "x.json", "--out", str(tmp_path)]
        assert main(args) == 2

    def test_realizations_must_be_positive(self, tmp_path):
        from skeletonizer.cli import main

        assert main(["disorder", "--L", "2", "--temps", "1.0", "--realizations", "0", "--out", str(tmp_path)]) == 2

    def test_3d_size_limit(self, tmp_path):
        from skeletonizer.cli import main

        assert main(["disorder", "--dim", "3", "--L", "3", "--temps", "1.0", "--out", str(tmp_path)]) == 2


class TestSelftest:
    def test_filter(self, tmp_path, capsys):
        from skeletonizer.cli import main

        assert main(["selftest", "--filter", "svd", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "orthonormal" in out and "discarded_weight" in out
        assert "monotone" not in out
        manifest = json.loads((tmp_path / "selftest.json").read_text(encoding="utf-8"))
        assert {r["group"] for r in manifest["rows"]} == {"svd"}
        assert all(r["ok"] is True for r in manifest["rows"])

    def test_flipped_sign_fails(self):
        from skeletonizer.cli import main

        assert main(["selftest", "--filter", "fake_impurity", "--debug-flip-sign"]) == 1

    def test_unknown_filter(self, capsys):
        from skeletonizer.cli import main

        assert main(["selftest", "--filter", "nothing-matches"]) == 2
        assert "groups are" in capsys.readouterr().err
