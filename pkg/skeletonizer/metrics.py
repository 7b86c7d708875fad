"""Timed run record: named steps, flags and scores.

Drivers call ``step`` once per coarse-graining level; the CLI stores the
finalized record in its results manifest.
"""

from __future__ import annotations

import json
import time
from pathlib import Path


class RunMetrics:
    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.data: dict = {"started_at": time.time(), "steps": [], "flags": {}, "scores": {}}

    def step(self, name: str, ok: bool = True, extra: dict | None = None) -> None:
        now = time.time()
        steps = self.data["steps"]
        prev_ts = steps[-1]["ts"] if steps else self.data["started_at"]
        elapsed_ms = round((now - prev_ts) * 1000, 2)
        merged_extra = {**(extra or {}), "elapsed_ms": elapsed_ms}
        steps.append({"ts": now, "name": name, "ok": ok, "extra": merged_extra})

    def flag(self, key: str, val) -> None:
        self.data["flags"][key] = val

    def score(self, key: str, val: float) -> None:
        self.data["scores"][key] = val

    @property
    def steps(self) -> list[dict]:
        return self.data["steps"]

    def finalize(self) -> dict:
        """Close the record; appends it as one JSON line when a path was given."""
        self.data["finished_at"] = time.time()
        self.data["duration_sec"] = round(self.data["finished_at"] - self.data["started_at"], 2)
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(self.data, ensure_ascii=False) + "\n")
        return self.data
