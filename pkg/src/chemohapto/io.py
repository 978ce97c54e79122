"""Artifact persistence: series CSV, binary field dumps, SVG heatmaps, reports.

Field dumps are flat binary with a fixed 32-byte header
(8-byte ASCII magic, nx and ny as uint32, Lx and Ly as float64, all
little-endian) followed by the row-major float64 payload.  Series files
are UTF-8 CSV with a header row and 17-significant-digit floats so that
values round-trip bit-exactly through text.
"""

from __future__ import annotations

import json
import math
import os
import struct
from typing import Iterable, Optional

import numpy as np

from .diagnostics import DiagnosticsRecord
from .grid import Grid

FIELD_MAGIC = b"CHFIELD1"
_HEADER = struct.Struct("<8sIIdd")   # 8 + 4 + 4 + 8 + 8 = 32 bytes


def write_field(path: str, grid: Grid, f: np.ndarray) -> None:
    """Dump one scalar field with the 32-byte geometry header."""
    grid.check_shape(f)
    data = np.ascontiguousarray(f, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FIELD_MAGIC, grid.nx, grid.ny, grid.Lx, grid.Ly))
        fh.write(data.tobytes(order="C"))


def read_field(path: str, grid: Optional[Grid] = None) -> np.ndarray:
    """Load a field dump; validates magic, payload size, and grid match."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header ({len(head)} bytes)")
        magic, nx, ny, lx, ly = _HEADER.unpack(head)
        if magic != FIELD_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        payload = fh.read()
    expected = nx * ny * 8
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"for a {nx}x{ny} field"
        )
    f = np.frombuffer(payload, dtype="<f8").reshape(nx, ny).copy()
    if grid is not None:
        if (nx, ny) != grid.shape:
            raise ValueError(
                f"{path}: field is {nx}x{ny}, grid is {grid.nx}x{grid.ny}"
            )
        if not (math.isclose(lx, grid.Lx) and math.isclose(ly, grid.Ly)):
            raise ValueError(
                f"{path}: domain ({lx}, {ly}) does not match grid "
                f"({grid.Lx}, {grid.Ly})"
            )
    return f


def write_series(path: str, records: Iterable[DiagnosticsRecord]) -> None:
    """Write the diagnostics time series as CSV (header + %.17g floats)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(DiagnosticsRecord.csv_header() + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")


def read_series(path: str) -> dict:
    """Read a series CSV back into {column: float array}."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = np.array(rows, dtype=float) if rows else np.zeros((0, len(header)))
    return {name: cols[:, i] for i, name in enumerate(header)}


def write_report(path: str, report: dict) -> None:
    """Serialize a report dict as JSON (non-finite floats use JSON Infinity)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, allow_nan=True)
        fh.write("\n")


def read_report(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ----------------------------------------------------------------------
# SVG heatmaps

# five-stop blue-to-yellow map, interpolated componentwise
_STOPS = np.array([
    (68, 1, 84),
    (59, 82, 139),
    (33, 145, 140),
    (94, 201, 98),
    (253, 231, 37),
], dtype=float)


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    pos = t * (len(_STOPS) - 1)
    i = min(int(pos), len(_STOPS) - 2)
    frac = pos - i
    rgb = _STOPS[i] * (1.0 - frac) + _STOPS[i + 1] * frac
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def field_svg(grid: Grid, f: np.ndarray, title: str = "",
              max_cells: int = 128) -> str:
    """Self-contained SVG heatmap of one field (inline rects, no deps).

    Fields finer than max_cells per axis are block-averaged first to keep
    file sizes sane; the data range is printed under the title.
    """
    grid.check_shape(f)
    g = np.asarray(f, dtype=float)
    nx, ny = g.shape
    sx = max(1, int(math.ceil(nx / max_cells)))
    sy = max(1, int(math.ceil(ny / max_cells)))
    if sx > 1 or sy > 1:
        tx, ty = (nx // sx) * sx, (ny // sy) * sy
        g = g[:tx, :ty].reshape(tx // sx, sx, ty // sy, sy).mean(axis=(1, 3))
    gnx, gny = g.shape
    lo, hi = float(np.min(g)), float(np.max(g))
    span = hi - lo if hi > lo else 1.0

    w_px, h_px = 560, 560
    pad, head = 10, 34
    cw = (w_px - 2 * pad) / gnx
    ch = (h_px - 2 * pad) / gny
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w_px}" '
        f'height="{h_px + head}" viewBox="0 0 {w_px} {h_px + head}">',
        f'<rect width="{w_px}" height="{h_px + head}" fill="white"/>',
        f'<text x="{pad}" y="16" font-family="monospace" font-size="13">'
        f'{title}</text>',
        f'<text x="{pad}" y="30" font-family="monospace" font-size="11" '
        f'fill="#555">range [{lo:.6g}, {hi:.6g}]</text>',
    ]
    for i in range(gnx):
        x = pad + i * cw
        for j in range(gny):
            # SVG y grows downward; flip so j=0 sits at the bottom edge
            y = head + pad + (gny - 1 - j) * ch
            c = _color((float(g[i, j]) - lo) / span)
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw + 0.5:.2f}" '
                f'height="{ch + 0.5:.2f}" fill="{c}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts)


def write_field_svg(path: str, grid: Grid, f: np.ndarray, title: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(field_svg(grid, f, title))


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
