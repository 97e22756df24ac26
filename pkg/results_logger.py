# results_logger.py
import csv
import json
import sys
from pathlib import Path
from threading import Lock

import numpy
import scipy

import config

_STATUS_MARKS = {"ok": "✅", "warn": "⚠️", "error": "❌", "wait": "⏳"}


def status(tag: str, message: str, level: str = "ok"):
    """Human-readable progress line on stderr; stdout is reserved for data."""
    if config.SPARSEKERN_QUIET:
        return
    print(f"{_STATUS_MARKS.get(level, '•')} [{tag}] {message}", file=sys.stderr)


def format_value(value) -> str:
    """Floats as repr so a CSV round-trips exactly and reruns write identical bytes."""
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


class ResultsLogger:
    """Writes study rows to a CSV file, creating it with its header first."""

    def __init__(self, filename, header: list[str], overwrite: bool = True):
        self.filename = Path(filename)
        self.header = list(header)
        self.lock = Lock()
        self._initialize_file(overwrite)

    def _initialize_file(self, overwrite: bool):
        with self.lock:
            if overwrite or not self.filename.exists():
                self.filename.parent.mkdir(parents=True, exist_ok=True)
                with open(self.filename, "w", newline="", encoding="utf-8") as f:
                    csv.writer(f, lineterminator="\n").writerow(self.header)

    def log(self, row: dict):
        missing = [k for k in self.header if k not in row]
        if missing:
            raise KeyError(f"row is missing columns {missing}")
        with self.lock:
            with open(self.filename, "a", newline="", encoding="utf-8") as f:
                csv.writer(f, lineterminator="\n").writerow([format_value(row[k]) for k in self.header])

    def log_many(self, rows):
        for row in rows:
            self.log(row)


def write_meta(filename, study: str, params: dict, seed: int, extra: dict | None = None) -> Path:
    """`<name>.meta.json`: full config, seed and library versions."""
    meta = {
        "study": study,
        "seed": seed,
        "config": params,
        "versions": {
            config.PACKAGE_NAME: config.PACKAGE_VERSION,
            "python": sys.version.split()[0],
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        meta.update(extra)
    path = Path(filename)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    return path


def _json_default(value):
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")
