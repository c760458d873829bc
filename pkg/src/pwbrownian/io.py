"""CSV and JSON-lines writers with a fixed, reproducible number format."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.12g"


def write_csv(path, columns, data):
    """Write a 2-D array with a header row; floats use :data:`FLOAT_FORMAT`."""
    data = np.asarray(data)
    if data.ndim == 1:
        data = data[:, None]
    if data.shape[1] != len(columns):
        raise ValueError(f"{len(columns)} column names for {data.shape[1]} columns")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, data, delimiter=",", header=",".join(columns), comments="", fmt=FLOAT_FORMAT)
    return path


def read_csv(path):
    """Return ``(columns, array)`` from a file written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        columns = next(csv.reader(fh))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return columns, data


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def to_json(obj, **kwargs):
    """``json.dumps`` after converting numpy scalars/arrays and non-finite floats."""
    return json.dumps(_plain(obj), sort_keys=True, **kwargs)


def write_jsonl(path, records, append=False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a" if append else "w") as fh:
        for rec in records:
            fh.write(to_json(rec) + "\n")
    return path


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
