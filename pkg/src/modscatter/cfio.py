"""
Binary serialization of complex fields (`.cf` files).

Layout: one UTF-8 JSON header line (dim, N per dim, L per dim, time,
space tag, dtype "complex128-le") terminated by '\\n', followed by the
raw little-endian interleaved (re, im) doubles in row-major order.
"""

from __future__ import annotations

import json

import numpy as np

from .spectral import ComplexField, Grid


def save_cf_values(grid: Grid, values, time: float, space: str, path) -> None:
    """Low-level writer; values may contain NaN (used for masked arrays like Φ)."""
    header = {
        "dim": grid.dim,
        "points": [grid.points_per_dim] * grid.dim,
        "box_length": [grid.box_length] * grid.dim,
        "time": time,
        "space": space,
        "dtype": "complex128-le",
    }
    arr = np.ascontiguousarray(values, dtype="<c16")
    if arr.shape != grid.shape:
        raise ValueError(f"values shape {arr.shape} does not match grid shape {grid.shape}")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(arr.tobytes())


def load_cf_values(path):
    """Low-level reader; returns (grid, values, time, space) without validation."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: malformed .cf header") from exc
    for key in ("dim", "points", "box_length", "time", "space", "dtype"):
        if key not in header:
            raise ValueError(f"{path}: .cf header missing field {key!r}")
    if header["dtype"] != "complex128-le":
        raise ValueError(f"{path}: unsupported dtype {header['dtype']!r}")
    points = header["points"]
    lengths = header["box_length"]
    if len(set(points)) != 1 or len(set(lengths)) != 1:
        raise ValueError(f"{path}: anisotropic grids are not supported")
    grid = Grid(int(header["dim"]), int(points[0]), float(lengths[0]))
    expected = grid.size * 16
    if len(payload) != expected:
        raise ValueError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<c16").reshape(grid.shape)
    return grid, values, float(header["time"]), header["space"]


def save_cf(field: ComplexField, path) -> None:
    save_cf_values(field.grid, field.values, field.time, field.space, path)


def load_cf(path) -> ComplexField:
    grid, values, time, space = load_cf_values(path)
    return ComplexField(grid, values, time, space)
