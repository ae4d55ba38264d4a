"""Field snapshots: legacy-VTK structured grids and CSV point clouds.

Point data arrays are named u, v, w, p; missing velocity components are
written as zeros so downstream tooling sees a fixed schema.
"""

import numpy as np

__all__ = ["write_snapshot", "write_vtk", "write_csv_points", "read_csv_points"]


def _point_arrays(mesh, velocity, pressure):
    ndofs = mesh.n_dofs
    arrays = {}
    for i, name in enumerate(("u", "v", "w")):
        if velocity is not None and i < velocity.ncomp:
            arrays[name] = velocity.data[i]
        else:
            arrays[name] = np.zeros(ndofs)
    arrays["p"] = pressure.values if pressure is not None else np.zeros(ndofs)
    return arrays


def _points3(mesh):
    pts = np.zeros((mesh.n_dofs, 3))
    pts[:, : mesh.dim] = mesh.node_coords
    return pts


def write_vtk(path, mesh, velocity=None, pressure=None, title="flow snapshot"):
    """Legacy ASCII STRUCTURED_GRID file loadable by standard viewers."""
    dims = [1, 1, 1]
    for k in range(mesh.dim):
        dims[k] = mesh.dofs_per_axis[k]
    pts = _points3(mesh)
    arrays = _point_arrays(mesh, velocity, pressure)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title + "\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_GRID\n")
        fh.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
        fh.write(f"POINTS {mesh.n_dofs} double\n")
        for row in pts:
            fh.write(f"{row[0]:.17g} {row[1]:.17g} {row[2]:.17g}\n")
        fh.write(f"POINT_DATA {mesh.n_dofs}\n")
        for name, vals in arrays.items():
            fh.write(f"SCALARS {name} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for v in vals:
                fh.write(f"{v:.17g}\n")
    return path


def write_csv_points(path, mesh, velocity=None, pressure=None):
    """Point-cloud alternative: x,y,z,u,v,w,p with one row per DoF."""
    pts = _points3(mesh)
    arrays = _point_arrays(mesh, velocity, pressure)
    with open(path, "w") as fh:
        fh.write("x,y,z,u,v,w,p\n")
        for i in range(mesh.n_dofs):
            row = (pts[i, 0], pts[i, 1], pts[i, 2], arrays["u"][i],
                   arrays["v"][i], arrays["w"][i], arrays["p"][i])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return path


def read_csv_points(path):
    """Read back a CSV snapshot as {column: array}."""
    with open(path) as fh:
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {name: data[:, j] for j, name in enumerate(names)}


def write_snapshot(path, mesh, velocity=None, pressure=None, fmt="vtk"):
    """Write one snapshot in the requested format ('vtk' or 'csv')."""
    fmt = fmt.lower()
    if fmt == "vtk":
        return write_vtk(path, mesh, velocity, pressure)
    if fmt == "csv":
        return write_csv_points(path, mesh, velocity, pressure)
    raise ValueError(f"unknown snapshot format {fmt!r}")
