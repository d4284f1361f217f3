"""
CSV and JSON helpers for experiment outputs.

Rows are pydantic models (or plain dicts); a metadata sidecar ``<name>.meta.json`` records the
config hash, seed and package version next to each CSV file.
"""

import csv
import importlib.metadata
import json
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from latticenc.utils.serializers import to_json


def _version() -> str:
    try:
        return importlib.metadata.version("latticenc")
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


def _as_dict(row: BaseModel | dict) -> dict[str, Any]:
    return row.model_dump(mode="json") if isinstance(row, BaseModel) else dict(row)


def write_csv(path: str | Path, rows: Iterable[BaseModel | dict], fieldnames: list[str] | None = None) -> Path:
    """Write rows with a header; fields follow the first row unless ``fieldnames`` is given."""
    path = Path(path)
    records = [_as_dict(row) for row in rows]
    if fieldnames is None:
        fieldnames = list(records[0]) if records else []
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for record in records:
            writer.writerow({k: _format(record.get(k)) for k in fieldnames})
    return path


def _format(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value)
    return value


def metadata_path(csv_path: str | Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".meta.json")


def write_metadata(csv_path: str | Path, *, config_hash: str, seed: int, **extra) -> Path:
    path = metadata_path(csv_path)
    payload = {"config_hash": config_hash, "seed": seed, "version": _version(), **extra}
    path.write_text(to_json(payload) + "\n")
    return path


def load_from_jsonl(filepath: str | Path) -> Iterator[dict]:
    with open(filepath, "r") as f:
        for line in f:
            if line.strip():
                yield json.loads(line)


def load_from_json(filepath: str | Path) -> Iterator[dict]:
    with open(filepath, "r") as f:
        data = json.load(f)
        yield from data


def load_from_csv(filepath: str | Path) -> Iterator[dict]:
    with open(filepath, "r", newline="") as f:
        reader = csv.DictReader(f)
        yield from reader


def load_results(filepath: str | Path) -> list[dict]:
    suffix = Path(filepath).suffix
    if suffix == ".jsonl":
        return list(load_from_jsonl(filepath))
    if suffix == ".json":
        return list(load_from_json(filepath))
    if suffix == ".csv":
        return list(load_from_csv(filepath))
    raise ValueError(f"Unsupported file format: {suffix}")
