"""CSV and VTK legacy output with atomic write-then-rename."""

from __future__ import annotations

import os
import tempfile

import numpy as np

CSV_COLUMNS = ["dim", "k", "n", "h", "dofs", "kappa", "nu", "omega", "delta1",
               "delta2", "err_u", "err_p", "err_phi", "err_total", "solver",
               "iterations", "residual", "wall_time"]

_CELL_TYPE = {2: 5, 3: 10}    # VTK_TRIANGLE, VTK_TETRA


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def atomic_write(path, text: str) -> None:
    """Write text to path via a temp file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(rows: list, path, extra_lines=()) -> None:
    """Rows are dicts keyed by CSV_COLUMNS entries; missing values stay empty."""
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in CSV_COLUMNS))
    lines.extend(extra_lines)
    atomic_write(path, "\n".join(lines) + "\n")


def write_vtk(mesh, fields: dict, path, title: str = "biotfreq output") -> None:
    """VTK legacy ASCII UNSTRUCTURED_GRID with complex nodal fields.

    Each field is a (n_vertices,) scalar or (n_vertices, dim) vector complex
    array; three point-data arrays are emitted per field: real part,
    imaginary part, and magnitude.
    """
    nv = mesh.n_vertices
    out = []
    out.append("# vtk DataFile Version 3.0")
    out.append(title)
    out.append("ASCII")
    out.append("DATASET UNSTRUCTURED_GRID")
    out.append(f"POINTS {nv} double")
    for v in mesh.vertices:
        coords = list(v) + [0.0] * (3 - mesh.dim)
        out.append(" ".join(f"{c:.16e}" for c in coords))
    npc = mesh.dim + 1
    out.append(f"CELLS {mesh.n_cells} {mesh.n_cells * (npc + 1)}")
    for cell in mesh.cells:
        out.append(f"{npc} " + " ".join(str(int(i)) for i in cell))
    out.append(f"CELL_TYPES {mesh.n_cells}")
    out.extend([str(_CELL_TYPE[mesh.dim])] * mesh.n_cells)
    out.append(f"POINT_DATA {nv}")
    for name, data in fields.items():
        data = np.asarray(data, dtype=np.complex128)
        if data.shape[0] != nv:
            raise ValueError(f"field {name} is not vertex-sized")
        if data.ndim == 1:
            for suffix, values in (("re", data.real), ("im", data.imag),
                                   ("mag", np.abs(data))):
                out.append(f"SCALARS {name}_{suffix} double 1")
                out.append("LOOKUP_TABLE default")
                out.extend(f"{v:.16e}" for v in values)
        else:
            mag = np.linalg.norm(data, axis=1)
            for suffix, values in (("re", data.real), ("im", data.imag)):
                out.append(f"VECTORS {name}_{suffix} double")
                for row in values:
                    coords = list(row) + [0.0] * (3 - data.shape[1])
                    out.append(" ".join(f"{c:.16e}" for c in coords))
            out.append(f"SCALARS {name}_mag double 1")
            out.append("LOOKUP_TABLE default")
            out.extend(f"{v:.16e}" for v in mag)
    atomic_write(path, "\n".join(out) + "\n")
