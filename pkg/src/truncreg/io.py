"""Config loading, dotted-path overrides and the flat-binary field format."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import Grid, GridFunction, build_grid, GridSpec

DTYPE = "<f8"


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Set ``a.b.c=value`` entries in a copy of ``cfg``; a leading ``plan.`` is optional."""
    cfg = json.loads(json.dumps(cfg))
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        parts = key.split(".")
        if parts[0] == "plan" and "plan" not in cfg:
            parts = parts[1:]
        node = cfg
        for p in parts[:-1]:
            nxt = node.get(p)
            if nxt is None:
                nxt = node[p] = {}
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {key!r}: {p!r} is not an object")
            node = nxt
        node[parts[-1]] = _parse_value(raw)
    return cfg


def write_field(stem, u: GridFunction, **meta) -> tuple[Path, Path]:
    """Write ``stem.bin`` (little-endian float64, row-major) and ``stem.json``."""
    stem = Path(stem)
    grid = u.grid
    data = np.ascontiguousarray(u.values, dtype=DTYPE)
    bin_path = stem.with_suffix(".bin")
    json_path = stem.with_suffix(".json")
    bin_path.write_bytes(data.tobytes(order="C"))
    sidecar = {
        "dims": list(grid.shape),
        "dim": grid.dim,
        "R": grid.side,
        "h": grid.h,
        "ordering": "row-major",
        "dtype": "float64-le",
        "nodes_per_unit": meta.pop("nodes_per_unit", None),
    }
    sidecar.update(meta)
    json_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    return bin_path, json_path


def read_field(stem) -> tuple[GridFunction, dict]:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    values = np.fromfile(stem.with_suffix(".bin"), dtype=DTYPE).reshape(meta["dims"])
    rho = meta.get("nodes_per_unit")
    if rho is None:
        rho = round((meta["dims"][0] - 1) / meta["R"])
    grid = build_grid(GridSpec(meta["dim"], meta["R"], rho))
    if abs(grid.h - meta["h"]) > 1e-12 * meta["h"]:
        raise ConfigError("sidecar h is inconsistent with R and the node count")
    return GridFunction(grid, values), meta
