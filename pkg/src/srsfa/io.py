"""Serialization of matrices, tables and heatmaps.

CSV floats use 17 significant digits so values round-trip exactly; JSON is
written with sorted keys so reruns are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import DimensionError

PathLike = Union[str, Path]


def fmt(x: float) -> str:
    return "%.17g" % x


def write_matrix_csv(path: PathLike, matrix) -> None:
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w") as fh:
        for row in m:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_matrix_csv(path: PathLike) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_table_csv(path: PathLike, header: Sequence[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def matrix_to_json(matrix, metadata=None) -> str:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("only square matrices are serialized")
    return dumps({"n_states": m.shape[0], "entries": m.tolist(), "metadata": metadata or {}})


def matrix_from_json(text: str) -> tuple[np.ndarray, dict]:
    obj = json.loads(text)
    m = np.asarray(obj["entries"], dtype=float)
    if m.shape != (obj["n_states"], obj["n_states"]):
        raise DimensionError("entries do not match n_states")
    return m, obj.get("metadata", {})


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=1) + "\n"


def write_json(path: PathLike, obj) -> None:
    Path(path).write_text(dumps(obj))


# ---------------------------------------------------------------------------
# heatmaps


def normalize_grid(grid) -> np.ndarray:
    """Per-plot min-max scaling to [0, 1]; a constant grid maps to 0.5."""
    g = np.asarray(grid, dtype=float)
    lo, hi = float(g.min()), float(g.max())
    if hi - lo <= 1e-12 * max(1.0, abs(hi), abs(lo)):
        return np.full_like(g, 0.5)
    return (g - lo) / (hi - lo)


def rendered(grid) -> np.ndarray:
    """Flip a ``[row, col]`` field so row 0 ends up at the bottom of the image."""
    return np.asarray(grid)[::-1]


def heatmap_pixels(normalized) -> np.ndarray:
    return np.rint(255.0 * np.asarray(normalized)).astype(np.uint8)


def write_heatmap(path_stem: PathLike, grid, svg: bool = False, cell: int = 20) -> dict:
    """Write ``.csv`` (normalized, rendered orientation), ``.pgm`` and optionally ``.svg``.

    The SVG uses a 256-step gray ramp: value v is drawn as ``rgb(k, k, k)``
    with ``k = round(255 v)``, i.e. the same level as the PGM pixel.
    """
    stem = Path(path_stem)
    view = rendered(normalize_grid(grid))
    pixels = heatmap_pixels(view)
    paths = {"csv": stem.with_suffix(".csv"), "pgm": stem.with_suffix(".pgm")}
    write_matrix_csv(paths["csv"], view)
    h, w = pixels.shape
    with open(paths["pgm"], "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    if svg:
        paths["svg"] = stem.with_suffix(".svg")
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * cell}" height="{h * cell}">'
        ]
        for r in range(h):
            for c in range(w):
                k = int(pixels[r, c])
                parts.append(
                    f'<rect x="{c * cell}" y="{r * cell}" width="{cell}" height="{cell}" fill="rgb({k},{k},{k})"/>'
                )
        parts.append("</svg>\n")
        paths["svg"].write_text("\n".join(parts))
    return paths


def read_pgm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    pos += 1
    w, h = int(tokens[1]), int(tokens[2])
    return np.frombuffer(data, dtype=np.uint8, offset=pos, count=w * h).reshape(h, w)
