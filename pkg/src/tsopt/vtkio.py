"""Legacy-VTK ASCII export of meshes, nodal fields and interface polylines."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Mesh

__all__ = ["write_vtk", "write_interface_vtk"]


def write_vtk(path, mesh: Mesh, point_data: dict | None = None) -> None:
    """Triangle mesh with optional nodal scalar fields."""
    path = Path(path)
    lines = [
        "# vtk DataFile Version 3.0",
        "tsopt snapshot",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_nodes} double",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{x:.17g} {y:.17g} 0")
    n = mesh.num_elements
    lines.append(f"CELLS {n} {4 * n}")
    for tri in mesh.elements:
        lines.append(f"3 {tri[0]} {tri[1]} {tri[2]}")
    lines.append(f"CELL_TYPES {n}")
    lines.extend(["5"] * n)
    if point_data:
        lines.append(f"POINT_DATA {mesh.num_nodes}")
        for name, values in point_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.17g}" for v in np.asarray(values, dtype=float))
    path.write_text("\n".join(lines) + "\n")


def write_interface_vtk(path, segments) -> None:
    """Interface segments as VTK line cells (POLYDATA)."""
    path = Path(path)
    points = []
    cells = []
    for _, (p0, p1) in segments:
        cells.append((len(points), len(points) + 1))
        points.append(p0)
        points.append(p1)
    lines = [
        "# vtk DataFile Version 3.0",
        "tsopt interface",
        "ASCII",
        "DATASET POLYDATA",
        f"POINTS {len(points)} double",
    ]
    for x, y in points:
        lines.append(f"{x:.17g} {y:.17g} 0")
    lines.append(f"LINES {len(cells)} {3 * len(cells)}")
    for a, b in cells:
        lines.append(f"2 {a} {b}")
    path.write_text("\n".join(lines) + "\n")
