"""Text formats: series, density, raw-sample, forecast and score CSV files, fit JSON, run manifests.

Every number is written with 17 significant digits so files round-trip
exactly.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import DataError
from .grid import PROBABILITY, SUPPORT, DensitySeries, Grid

FMT = "%.17g"


def fmt(x):
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return FMT % x


def _write_table(path, head, points, labels, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([head] + [fmt(x) for x in points])
        for label, row in zip(labels, rows):
            w.writerow([label] + [fmt(x) for x in row])


def _read_table(path, head):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][0].strip() != head:
        raise DataError("bad-format", f"{path}: first header field must be {head!r}")
    try:
        points = np.array([float(x) for x in rows[0][1:]])
        labels = [r[0] for r in rows[1:]]
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError("bad-format", f"{path}: {exc}") from exc
    if len(rows) < 2:
        raise DataError("empty-series", f"{path}: no data rows")
    if values.ndim != 2 or values.shape[1] != points.size:
        raise DataError("length-mismatch", f"{path}: every row needs {points.size} values")
    return points, labels, values


def write_series(path, series: DensitySeries):
    labels = series.timestamps or [str(t) for t in range(len(series))]
    _write_table(path, "s", series.grid.points, labels, series.values)


def read_series(path) -> DensitySeries:
    points, labels, values = _read_table(path, "s")
    return DensitySeries(Grid(points, PROBABILITY), values, tuple(labels))


def write_densities(path, u_points, labels, rows):
    _write_table(path, "u", u_points, labels, rows)


def read_densities(path):
    """``(support Grid, labels, values)`` from a density CSV."""
    points, labels, values = _read_table(path, "u")
    return Grid(points, SUPPORT), labels, values


def read_raw_samples(path):
    """``[(timestamp, samples)]``; rows may have any number of samples."""
    out = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                samples = np.array([float(x) for x in row[1:] if x.strip() != ""])
            except ValueError as exc:
                if i == 0:
                    continue  # header line
                raise DataError("bad-format", f"{path} line {i + 1}: {exc}") from exc
            out.append((row[0], samples))
    return out


def write_scores(path, scores):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "p", "K", "R", "score"])
        for s in scores:
            w.writerow([s.method, s.p, s.K, fmt(s.R), fmt(s.score)])


def read_scores(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, allow_nan=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def manifest_path(output):
    return Path(str(output) + ".manifest.json")
