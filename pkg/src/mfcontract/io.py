"""CSV and JSON writers with 17 significant digits and LF line endings."""
from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

_MARK = "\x00F"
_PLACEHOLDER = re.compile(r'"\\u0000F([^"]*)"')


def _float(x: float) -> str:
    text = format(x, ".17g")
    # keep floats recognisable as floats ("1.0", not "1")
    return text if any(ch in text for ch in ".eEn") else text + ".0"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return _float(float(x))
    return str(x)


def _prepare(obj):
    if isinstance(obj, dict):
        return {str(k): _prepare(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prepare(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_prepare(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return _MARK + _float(x) if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    """JSON text whose floats carry 17 significant digits; non-finite floats become null."""
    text = json.dumps(_prepare(obj), indent=2, ensure_ascii=False)
    return _PLACEHOLDER.sub(r"\1", text) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8", newline="\n")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_columns(path, header, *columns) -> Path:
    """CSV from equal-length columns."""
    return write_csv(path, header, zip(*columns))


def write_curve(path, curve, name: str = "value") -> Path:
    return write_columns(path, ("t", name), curve.grid.points, curve.values)


def write_ensemble(path, ensemble, max_paths: int | None = None) -> Path:
    """Long-format ensemble dump with columns ``path_id, t, x, y``."""
    x = ensemble.x_paths if max_paths is None else ensemble.x_paths[:max_paths]
    y = ensemble.y_paths
    if y is not None:
        y = y[: x.shape[0]]
    t = ensemble.grid.points

    def rows():
        for i in range(x.shape[0]):
            for j, tj in enumerate(t):
                yield i, tj, x[i, j], (y[i, j] if y is not None else float("nan"))

    return write_csv(path, ("path_id", "t", "x", "y"), rows())


def read_csv(path):
    """Header and float rows of a CSV written by this module."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, np.array([[float(v) for v in row] for row in r])
