"""CSV/JSON output with provenance headers.

Tables are plain CSV preceded by ``# key=value`` comment lines.  Floats are
written with ``repr`` precision so identical inputs give byte-identical
files.
"""

from __future__ import annotations

import csv
import json
from importlib import metadata
from pathlib import Path

import numpy as np

PACKAGE = "artifact"


def code_version() -> str:
    try:
        return metadata.version(PACKAGE)
    except metadata.PackageNotFoundError:  # pragma: no cover - source checkout
        return "unknown"


def provenance_lines(provenance) -> list[str]:
    items = {"code_version": code_version(), **(provenance or {})}
    return [f"# {k}={_fmt(v)}" for k, v in items.items()]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return str(v.item())
    return str(v)


def write_table(path, columns, rows, provenance=None) -> Path:
    """Write ``rows`` (2D array or list of sequences) under ``columns``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in provenance_lines(provenance):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_table(path):
    """Inverse of :func:`write_table`: ``(provenance, columns, rows)`` with rows as strings."""
    meta, body = {}, []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
            else:
                body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    return meta, columns, [row for row in reader]


def read_numeric(path):
    meta, columns, rows = read_table(path)
    return meta, columns, np.array([[float(v) for v in r] for r in rows]).reshape(-1, len(columns))


def write_json(path, payload, provenance=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"provenance": {"code_version": code_version(), **(provenance or {})}, **payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
