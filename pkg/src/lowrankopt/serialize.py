"""Lossless text codecs for matrices and factored points.

Floats are printed with 17 significant digits, which round-trips every
finite double exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .linalg import as_matrix
from .variety import VarietyPoint


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def matrix_to_csv(x) -> str:
    a = as_matrix(x)
    return "\n".join(",".join(_fmt(v) for v in row) for row in a) + "\n"


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [
        [float(cell) for cell in line.split(",")]
        for line in text.strip().splitlines()
        if line.strip()
    ]
    if not rows:
        raise ValueError("empty CSV matrix")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"ragged CSV matrix: row widths {sorted(widths)}")
    return as_matrix(np.array(rows))


def matrix_to_json(x) -> dict:
    a = as_matrix(x)
    return {"rows": a.shape[0], "cols": a.shape[1], "entries": a.ravel().tolist()}


def matrix_from_json(obj) -> np.ndarray:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    entries = np.asarray(obj["entries"], dtype=np.float64)
    if entries.size != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {entries.size}")
    return as_matrix(entries.reshape(rows, cols))


def point_to_json(point: VarietyPoint) -> dict:
    m, n = point.shape
    return {
        "u": matrix_to_json(point.u) if point.rank else {"rows": m, "cols": 0, "entries": []},
        "sigma": point.sigma.tolist(),
        "v": matrix_to_json(point.v) if point.rank else {"rows": n, "cols": 0, "entries": []},
        "rank": point.rank,
        "m": m,
        "n": n,
        "r": point.rank_bound,
    }


def point_from_json(obj) -> VarietyPoint:
    m, n, rank = int(obj["m"]), int(obj["n"]), int(obj["rank"])
    if rank == 0:
        u, v = np.zeros((m, 0)), np.zeros((n, 0))
    else:
        u, v = matrix_from_json(obj["u"]), matrix_from_json(obj["v"])
    sigma = np.asarray(obj["sigma"], dtype=np.float64)
    return VarietyPoint(u, sigma, v, int(obj["r"]))


def save_matrix(x, path) -> None:
    """Write a matrix as CSV (``.csv``) or JSON (anything else)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        path.write_text(matrix_to_csv(x), encoding="utf-8")
    else:
        path.write_text(json.dumps(matrix_to_json(x)), encoding="utf-8")


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".csv":
        return matrix_from_csv(text)
    return matrix_from_json(json.loads(text))
