"""Result formatting for humans and machines.

- ASCII box (terminal): run header plus one table row per point
- CSV (plotting): fixed column order per command
- JSON (machine): rows wrapped in the run manifest

Column sets are fixed per command and mirrored in
``schemas/results.schema.json``.
"""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

_WIDTH = 64

COLUMNS: dict[str, list[str]] = {
    "free-energy": [
        "dim",
        "L",
        "chi",
        "variant",
        "T",
        "beta",
        "log_Z",
        "log_Z_per_site",
        "f_site",
        "delta_f",
        "delta_brute",
        "seconds_per_iteration",
    ],
    "observables": ["dim", "L", "chi", "T", "beta", "field", "u_tns", "u_exact", "m_tns", "m_plus_exact"],
    "disorder": ["seed", "distribution", "dim", "L", "chi", "T", "beta", "log_Z", "q", "delta_brute"],
    "selftest": ["group", "name", "ok", "detail", "seconds"],
}


# ── Display helpers ──────────────────────────────────────────────────────────


def _fit(s: str, width: int) -> str:
    if len(s) > width:
        s = s[: width - 1] + "…"
    return s.ljust(width)


def _row(label: str, value: str, width: int = _WIDTH) -> str:
    return f"│{_fit(f' {label:<20}: {value}', width)}│"


def _section_header(title: str, width: int = _WIDTH) -> str:
    return "├" + f" {title} ".center(width, "─") + "┤"


def _header(title: str, width: int = _WIDTH) -> str:
    return "┌" + f" {title} ".center(width, "─") + "┐"


def _footer(width: int = _WIDTH) -> str:
    return f"└{'─' * width}┘"


def format_value(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "PASS" if v else "FAIL"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if v != 0 and (abs(v) < 1e-3 or abs(v) >= 1e6):
            return f"{v:.3e}"
        return f"{v:.6g}"
    return str(v)


# ── ASCII format ─────────────────────────────────────────────────────────────


_TABLE_COLUMNS = {
    "free-energy": ["T", "f_site", "delta_f", "delta_brute", "seconds_per_iteration"],
    "observables": ["T", "u_tns", "u_exact", "m_tns", "m_plus_exact"],
    "disorder": ["seed", "T", "log_Z", "q", "delta_brute"],
}


def format_table(command: str, rows: Sequence[Mapping], header: Mapping | None = None) -> str:
    """Run header and one line per row, framed for the terminal."""
    cols = _TABLE_COLUMNS[command]
    cell = max(8, _WIDTH // len(cols) - 1)
    width = max(_WIDTH, (cell + 1) * len(cols) + 1)
    lines = [_header(f"tns {command}", width)]
    for key, value in (header or {}).items():
        lines.append(_row(key, format_value(value), width))
    lines.append(_section_header("Results", width))
    short = {"seconds_per_iteration": "s/iter", "m_plus_exact": "m_exact"}
    lines.append("│" + _fit(" " + " ".join(_fit(short.get(c, c), cell) for c in cols), width) + "│")
    for r in rows:
        text = " " + " ".join(_fit(format_value(r.get(c)), cell) for c in cols)
        lines.append("│" + _fit(text, width) + "│")
    lines.append(_footer(width))
    return "\n".join(lines)


def format_summary(summary: Mapping) -> str:
    lines = [_header("Ensemble")]
    for key, value in summary.items():
        lines.append(_row(key, format_value(value)))
    lines.append(_footer())
    return "\n".join(lines)


def format_selftest(results: Iterable[Mapping]) -> str:
    """Pass/fail table of self-test checks."""
    results = list(results)
    failed = sum(1 for r in results if not r["ok"])
    lines = [_header("Self-test")]
    group = None
    for r in results:
        if r["group"] != group:
            group = r["group"]
            lines.append(_section_header(group))
        status = "PASS" if r["ok"] else "FAIL"
        lines.append(_row(r["name"], f"{status}  {r['detail']} ({r['seconds']:.2f}s)"))
    lines.append(_section_header("Summary"))
    lines.append(_row("Checks", str(len(results))))
    lines.append(_row("Failed", str(failed)))
    lines.append(_footer())
    return "\n".join(lines)


# ── CSV / JSON ───────────────────────────────────────────────────────────────


def _clean(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def write_csv(path: str | Path, command: str, rows: Iterable[Mapping]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS[command], extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in COLUMNS[command]})
    return path


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def build_manifest(
    command: str,
    config: Mapping,
    version: str,
    seeds: Mapping,
    rows: Sequence[Mapping],
    diagnostics: Sequence,
    started_at: str,
    finished_at: str | None = None,
    summary: Mapping | None = None,
) -> dict:
    """Everything needed to read, and to re-run, one CLI invocation."""
    manifest = {
        "command": command,
        "config": dict(config),
        "version": version,
        "seeds": dict(seeds),
        "started_at": started_at,
        "finished_at": finished_at or now_iso(),
        "rows": [{k: r.get(k) for k in COLUMNS[command]} for r in rows],
        "diagnostics": list(diagnostics),
    }
    if summary is not None:
        manifest["summary"] = dict(summary)
    return _clean(manifest)


def format_json(manifest: Mapping) -> str:
    return json.dumps(manifest, ensure_ascii=False, indent=2)


def write_json(path: str | Path, manifest: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_json(manifest) + "\n", encoding="utf-8")
    return path


def load_manifest(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("command", "config"):
        if key not in doc:
            raise ValueError(f"{path}: manifest has no {key!r} entry")
    return doc
