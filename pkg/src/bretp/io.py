"""Atomic CSV/JSON output with round-trip float formatting."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(x):
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Header and float columns of a CSV written by ``write_csv``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = {}
    for k, name in enumerate(header):
        vals = [r[k] for r in rows]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals, dtype=object)
    return header, cols


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, obj):
    return _atomic_write(path, json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def write_events(path, events):
    """Event times as a one-column CSV; the input path, if any, goes to a sidecar."""
    path = Path(path)
    write_csv(path, ["time"], ([t] for t in events.jump_times))
    if events.input_states is not None:
        side = path.with_name(path.stem + "_input.csv")
        write_csv(side, ["time", "input_state"],
                  zip(events.input_switch_times, events.input_states))
    return path


def read_events(path, horizon=None):
    from .mc import EventPath
    _, cols = read_csv(path)
    t = cols["time"]
    return EventPath(t, float(horizon if horizon is not None else (t[-1] if t.size else 0.0)))
