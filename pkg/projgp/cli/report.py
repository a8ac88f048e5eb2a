from __future__ import annotations

import datetime
import hashlib
import json
import logging
import pathlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd

from ..utils.files import prepare_output

__all__ = (
    "run_id",
    "ExperimentReport",
)


log = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, pathlib.Path):
        return str(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def run_id(command: str, config: dict[str, Any], seed: int) -> str:
    """Short hash of the command, its configuration and seed."""
    payload = json.dumps({"command": command, "config": _jsonable(config), "seed": seed}, sort_keys=True)
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:12]


@dataclass(eq=False)
class ExperimentReport:
    """Long format rows plus a JSON summary echoing the configuration and seed."""

    command: str
    config: dict[str, Any]
    seed: int
    rows: pd.DataFrame = field(default_factory=pd.DataFrame, repr=False)
    summary: dict[str, Any] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    created_at: str = field(default_factory=lambda: datetime.datetime.now(datetime.timezone.utc).isoformat())

    @property
    def run_id(self) -> str:
        return run_id(self.command, self.config, self.seed)

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(
            {
                "run_id": self.run_id,
                "command": self.command,
                "seed": self.seed,
                "config": self.config,
                "summary": self.summary,
                "timings": self.timings,
                "created_at": self.created_at,
            }
        )

    def write(self, out: str | pathlib.Path | None) -> None:
        """Writes ``<out>.csv`` and ``<out>.json``, or prints a table when ``out`` is None."""
        if out is None:
            print(self.rows.to_string(index=False))
            print(json.dumps(self.to_dict(), indent=2))
            return

        base = prepare_output(out)
        if base.suffix in (".csv", ".json"):
            base = base.with_suffix("")
        csv_path = base.with_suffix(".csv")
        json_path = base.with_suffix(".json")
        self.rows.to_csv(csv_path, index=False)
        with open(json_path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        log.info("Wrote %s and %s (run %s).", csv_path, json_path, self.run_id)
