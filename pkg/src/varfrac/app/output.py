"""Snapshot files: plain text tables in 1D, legacy VTK in 3D."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..discretize import TetMesh
from ..ionic import GATES

FLOAT_FMT = "%.8e"  # 9 significant digits


class OutputError(OSError):
    pass


def _write(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write snapshot {path}: {exc.strerror or exc}") from exc
    return path


def write_snapshot_1d(path, x, v, gates=None, c=None, t: float | None = None) -> Path:
    """Columns ``x v`` and optionally the gates (``g_m`` ... ``g_x``) and calcium ``c``."""
    cols = [np.asarray(x, float), np.asarray(v, float)]
    names = ["x", "v"]
    if gates is not None:
        cols.extend(np.asarray(gates, float))
        names.extend("g_" + g for g in GATES)
        if c is not None:
            cols.append(np.asarray(c, float))
            names.append("c")
    header = "# " + " ".join(names)
    if t is not None:
        header += f"  t={t!r}"
    rows = np.column_stack(cols)
    body = "\n".join(" ".join(FLOAT_FMT % val for val in row) for row in rows)
    return _write(path, header + "\n" + body + ("\n" if body else ""))


def read_snapshot_1d(path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise OutputError(f"cannot read snapshot {path}: {exc.strerror or exc}") from exc
    names = lines[0].lstrip("#").split("t=")[0].split()
    data = np.array([[float(tok) for tok in ln.split()] for ln in lines[1:] if ln.strip()])
    data = data.reshape(-1, len(names))
    return {name: data[:, i] for i, name in enumerate(names)}


def write_snapshot_3d(path, mesh: TetMesh, v, t: float | None = None, name: str = "v") -> Path:
    """Legacy ASCII VTK unstructured grid of linear tetrahedra (cell type 10)."""
    nodes = np.asarray(mesh.nodes, float)
    elems = np.asarray(mesh.elements, int)
    v = np.asarray(v, float)
    if v.shape != (nodes.shape[0],):
        raise ValueError(f"expected {nodes.shape[0]} point values, got shape {v.shape}")
    title = "varfrac snapshot" + (f" t={t!r}" if t is not None else "")
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {nodes.shape[0]} double"]
    out.extend(" ".join(FLOAT_FMT % c for c in p) for p in nodes)
    out.append(f"CELLS {elems.shape[0]} {5 * elems.shape[0]}")
    out.extend("4 " + " ".join(str(int(i)) for i in e) for e in elems)
    out.append(f"CELL_TYPES {elems.shape[0]}")
    out.extend("10" for _ in range(elems.shape[0]))
    out.append(f"POINT_DATA {nodes.shape[0]}")
    out.append(f"SCALARS {name} double 1")
    out.append("LOOKUP_TABLE default")
    out.extend(FLOAT_FMT % val for val in v)
    return _write(path, "\n".join(out) + "\n")
