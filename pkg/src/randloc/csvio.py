"""CSV readers and writers shared by the CLI and the library.

One fixed dialect everywhere: UTF-8, comma separator, "\n" newlines,
floats printed with %.17g so a write/read cycle reproduces every float64
bit-exactly. Each file starts with `# key = value` metadata lines (sorted
by key, no timestamps), then the column header, then data. Byte-identical
reruns are a feature: nothing in these files depends on when they were
written.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .udist import UDensity, UGrid

__all__ = [
    "format_value",
    "write_table",
    "read_table",
    "write_density",
    "read_density",
    "write_trajectory",
    "read_trajectory",
]


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_table(path, columns: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named columns with sorted `# key = value` meta lines on top."""
    cols = {k: np.asarray(v) for k, v in columns.items()}
    lengths = {c.size for c in cols.values()}
    if len(lengths) > 1:
        raise ValueError(f"column lengths differ: { {k: c.size for k, c in cols.items()} }")
    lines = []
    for key in sorted(meta or {}):
        lines.append(f"# {key} = {format_value((meta or {})[key])}")
    lines.append(",".join(cols))
    n = lengths.pop() if lengths else 0
    series = list(cols.values())
    for i in range(n):
        lines.append(",".join(format_value(c[i]) for c in series))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_table(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Inverse of write_table; meta values come back as raw strings."""
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                meta[key.strip()] = val.strip()
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            continue
        rows.append(line.split(","))
    if header is None:
        raise ValueError(f"{path}: no header row found")
    data = np.asarray(rows, dtype=float) if rows else np.empty((0, len(header)))
    return {name: data[:, k] for k, name in enumerate(header)}, meta


def write_density(path, density: UDensity, meta: dict | None = None) -> None:
    write_table(path, {"u": density.grid.nodes(), "p": density.values}, meta)


def read_density(path) -> tuple[UDensity, dict[str, str]]:
    cols, meta = read_table(path)
    if set(cols) != {"u", "p"}:
        raise ValueError(f"{path}: expected columns u,p got {sorted(cols)}")
    u = cols["u"]
    if u.size < 2 or u[0] != 0.0:
        raise ValueError(f"{path}: node column must start at 0 with >= 2 nodes")
    grid = UGrid(u_max=float(u[-1]), n_bins=u.size - 1)
    if np.max(np.abs(grid.nodes() - u)) > 1e-9 * max(1.0, float(u[-1])):
        raise ValueError(f"{path}: nodes are not uniformly spaced")
    return UDensity(grid, cols["p"]), meta


def write_trajectory(path, taus, values, meta: dict | None = None, names=("tau", "g")) -> None:
    write_table(path, {names[0]: np.asarray(taus), names[1]: np.asarray(values)}, meta)


def read_trajectory(path, names=("tau", "g")) -> tuple[np.ndarray, np.ndarray, dict[str, str]]:
    cols, meta = read_table(path)
    if set(names) - set(cols):
        raise ValueError(f"{path}: expected columns {names} got {sorted(cols)}")
    return cols[names[0]], cols[names[1]], meta
