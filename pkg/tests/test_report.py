"""Tests for skeletonizer.report: terminal boxes, CSV and manifests."""

import csv
import json
import math
from pathlib import Path

import pytest

SCHEMA = Path(__file__).resolve().parent.parent / "schemas" / "results.schema.json"


class TestFormatValue:
    @pytest.mark.parametrize(
        ("value", "text"),
        [(None, "-"), (True, "PASS"), (False, "FAIL"), (float("nan"), "nan"), (0.0, "0"), (1.5, "1.5"), (2e-5, "2.000e-05"), (7, "7")],
    )
    def test_values(self, value, text):
        from skeletonizer.report import format_value

        assert format_value(value) == text


class TestAscii:
    def test_table_lines_have_equal_width(self):
        from skeletonizer.report import format_table

        rows = [{"T": 2.0, "f_site": -2.1, "delta_f": 1e-7, "delta_brute": None, "seconds_per_iteration": 0.25}]
        out = format_table("free-energy", rows, {"dim": 2, "L": 4, "chi": 4})
        lines = out.splitlines()
        assert lines[0].startswith("┌") and lines[-1].startswith("└")
        assert len({len(line) for line in lines}) == 1
        assert "s/iter" in out

    def test_summary_box(self):
        from skeletonizer.report import format_summary

        out = format_summary({"q_mean@T=1": 0.5, "realizations": 3})
        assert "Ensemble" in out
        assert "q_mean@T=1" in out

    def test_selftest_box(self):
        from skeletonizer.report import format_selftest

        results = [
            {"group": "svd", "name": "orthonormal", "ok": True, "detail": "fine", "seconds": 0.01},
            {"group": "als", "name": "monotone", "ok": False, "detail": "rose", "seconds": 0.02},
        ]
        out = format_selftest(results)
        assert "PASS" in out and "FAIL" in out
        assert "Failed" in out

    def test_long_cells_are_cut_to_width(self):
        from skeletonizer.report import format_selftest

        results = [{"group": "als", "name": "monotone", "ok": True, "detail": "x" * 200, "seconds": 0.5}]
        lines = format_selftest(results).splitlines()
        assert len({len(line) for line in lines}) == 1
        assert any("…" in line for line in lines)


class TestFiles:
    def test_csv_column_order(self, tmp_path):
        from skeletonizer.report import COLUMNS, write_csv

        rows = [{"seed": 1, "distribution": "pm1", "dim": 2, "L": 2, "chi": 4, "T": 1.0, "beta": 1.0, "log_Z": 3.5, "q": None, "delta_brute": None, "extra": "x"}]
        path = write_csv(tmp_path / "deep" / "disorder.csv", "disorder", rows)
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            body = next(reader)
        assert header == COLUMNS["disorder"]
        assert body[header.index("q")] == ""
        assert "extra" not in header

    def test_manifest_cleans_non_finite(self):
        from skeletonizer.report import build_manifest

        manifest = build_manifest(
            "observables",
            {"args": {"chi": 4}},
            "1.0.0",
            {},
            [{"T": 1.0, "u_tns": math.nan, "m_tns": 0.9, "unused": 1}],
            [{"T": 1.0, "levels": []}],
            started_at="2024-01-01T00:00:00+00:00",
        )
        row = manifest["rows"][0]
        assert row["u_tns"] is None
        assert "unused" not in row
        assert manifest["finished_at"]
        assert "summary" not in manifest

    def test_manifest_converts_numpy_scalars(self):
        import numpy as np

        from skeletonizer.report import build_manifest, format_json

        rows = [{"group": "svd", "name": "orthonormal", "ok": np.bool_(True), "detail": "fine", "seconds": np.float64(0.25)}]
        manifest = build_manifest("selftest", {"args": {}}, "1.0.0", {"als_seed": np.int64(3)}, rows, [], "t0", summary={"passed": np.int64(1)})
        doc = json.loads(format_json(manifest))
        assert doc["rows"][0]["ok"] is True
        assert doc["rows"][0]["seconds"] == 0.25
        assert doc["seeds"]["als_seed"] == 3
        assert doc["summary"]["passed"] == 1

    def test_manifest_roundtrip(self, tmp_path):
        from skeletonizer.report import build_manifest, load_manifest, write_json

        manifest = build_manifest("selftest", {"args": {}}, "1.0.0", {}, [], [], "t0", "t1", summary={"passed": 0})
        path = write_json(tmp_path / "selftest.json", manifest)
        assert load_manifest(path) == manifest

    def test_load_manifest_requires_config(self, tmp_path):
        from skeletonizer.report import load_manifest

        path = tmp_path / "broken.json"
        path.write_text(json.dumps({"command": "free-energy"}), encoding="utf-8")
        with pytest.raises(ValueError, match="config"):
            load_manifest(path)


class TestSchema:
    def test_rows_mirror_columns(self):
        from skeletonizer.report import COLUMNS

        schema = json.loads(SCHEMA.read_text(encoding="utf-8"))
        for command, cols in COLUMNS.items():
            row = schema["$defs"][f"{command.replace('-', '_')}_row"]
            assert row["required"] == cols
            assert list(row["properties"]) == cols
        assert schema["properties"]["command"]["enum"] == list(COLUMNS)
