"""Trial records and the append-only JSONL campaign log.

NaN fitness is stored as JSON null; every other field round-trips exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

__all__ = ["Trial", "append_line", "read_log", "trial_to_record", "trial_from_record"]


@dataclass
class Trial:
    """One evaluated candidate."""

    trial_id: int
    generation: int
    params_scaled: list[float]
    params_physical: dict[str, float]
    fitness: float
    status: str = "ok"
    wall_time_s: float = 0.0
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    @property
    def ok(self) -> bool:
        return self.status == "ok" and math.isfinite(self.fitness)


def trial_to_record(trial: Trial) -> dict:
    rec = asdict(trial)
    rec["type"] = "trial"
    if not math.isfinite(trial.fitness):
        rec["fitness"] = None
    return rec


def trial_from_record(rec: dict) -> Trial:
    fitness = rec["fitness"]
    return Trial(
        trial_id=rec["trial_id"],
        generation=rec["generation"],
        params_scaled=list(rec["params_scaled"]),
        params_physical=dict(rec["params_physical"]),
        fitness=float("nan") if fitness is None else float(fitness),
        status=rec.get("status", "ok"),
        wall_time_s=rec.get("wall_time_s", 0.0),
        timestamp=rec.get("timestamp", ""),
    )


def append_line(path: str | Path, record: dict) -> None:
    """Append one JSON record and flush it to disk."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, allow_nan=False) + "\n")
        fh.flush()


def read_log(path: str | Path) -> tuple[list[dict], bool]:
    """Parse a JSONL log; returns (records, torn_tail).

    A final line that does not parse is treated as torn (interrupted write)
    and dropped; a malformed line elsewhere is an error.
    """
    records: list[dict] = []
    torn = False
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                torn = True
                break
            raise ValueError(f"{path}: malformed record on line {i + 1}")
    return records, torn
