"""Boundary conditions: velocity walls, pressure Neumann data, outflow.

Walls impose the velocity strongly and feed the pressure Poisson problem a
Neumann datum in rotational form, dp/dn = -nu n . curl(curl u). Outflow
boundaries get a traction-derived pressure Dirichlet value with a
tanh-smoothed compensation that switches on under backflow; no velocity
condition is applied there.

Corner precedence: where a wall meets an outflow, the outflow pressure
Dirichlet wins for p and the wall value wins for the velocity.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import BoundaryTag
from .operators import GlobalOperators, ScalarField, VectorField

__all__ = [
    "OutflowConfig",
    "BoundaryData",
    "build_boundary_data",
    "dong_smoothing",
    "wall_pressure_neumann",
    "poisson_boundary_term",
    "outflow_pressure_dirichlet",
    "apply_velocity_dirichlet",
]


@dataclass(frozen=True)
class OutflowConfig:
    """Characteristic speed and smoothing width of the backflow switch."""

    U0: float = 1.0
    beta: float = 0.1

    def __post_init__(self):
        if not self.U0 > 0:
            raise ValueError(f"U0 must be positive, got {self.U0}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")


class BoundaryData:
    """Tagged boundary DoFs with normals and prescribed wall velocities."""

    def __init__(self, mesh, wall_faces, outflow_faces, wall_values,
                 outflow_cfg):
        self.mesh = mesh
        self.wall_faces = wall_faces
        self.outflow_faces = outflow_faces
        self.outflow_cfg = outflow_cfg
        self.wall_values = wall_values  # (dim, ndofs), meaningful on walls

        ndofs = mesh.n_dofs
        self.wall_mask = np.zeros(ndofs, dtype=bool)
        for f in wall_faces:
            self.wall_mask[f.dof_ids] = True
        self.outflow_mask = np.zeros(ndofs, dtype=bool)
        for f in outflow_faces:
            self.outflow_mask[f.dof_ids] = True
        self.wall_dofs = np.flatnonzero(self.wall_mask)
        self.outflow_dofs = np.flatnonzero(self.outflow_mask)

    @property
    def has_walls(self):
        return len(self.wall_faces) > 0

    @property
    def has_outflow(self):
        return len(self.outflow_faces) > 0

    @property
    def pressure_constrained(self):
        """Pressure Dirichlet DoFs (outflow); empty means pure Neumann."""
        return self.outflow_dofs


def build_boundary_data(mesh, outflow_cfg: OutflowConfig = None,
                        wall_velocity=None) -> BoundaryData:
    """Collect the mesh's tagged faces into solver-ready boundary data.

    ``wall_velocity`` is an optional callable points -> (npts, dim) giving
    the prescribed velocity on walls (default no-slip).
    """
    wall_faces = [f for f in mesh.boundary_faces.values()
                  if f.tag is BoundaryTag.DIRICHLET_WALL]
    outflow_faces = [f for f in mesh.boundary_faces.values()
                     if f.tag is BoundaryTag.OUTFLOW]
    if outflow_faces and outflow_cfg is None:
        outflow_cfg = OutflowConfig()
    values = np.zeros((mesh.dim, mesh.n_dofs))
    if wall_velocity is not None:
        for f in wall_faces:
            pts = mesh.node_coords[f.dof_ids]
            values[:, f.dof_ids] = np.asarray(wall_velocity(pts)).T
    return BoundaryData(mesh, wall_faces, outflow_faces, values, outflow_cfg)


def dong_smoothing(u_n, cfg: OutflowConfig):
    """Backflow indicator S0 = (1 - tanh(u_n / (U0 beta))) / 2.

    Smoothly 1 for inflow (u_n < 0) and 0 for outflow; exactly 1/2 at
    u_n = 0. Vectorizes over arrays of normal velocities.
    """
    return 0.5 * (1.0 - np.tanh(np.asarray(u_n, dtype=float) / (cfg.U0 * cfg.beta)))


def _double_curl(ops: GlobalOperators, u: VectorField) -> VectorField:
    """curl(curl u) with both curls taken by lumped projection."""
    omega = ops.curl(u)
    if ops.mesh.dim == 2:
        return ops.curl_of_plane_scalar(omega.component(0))
    return ops.curl(omega)


def wall_pressure_neumann(ops: GlobalOperators, bdata: BoundaryData,
                          u: VectorField, nu: float):
    """Rotational-form pressure flux on every wall face.

    Returns {face name: flux at face.dof_ids} with
    flux = -nu n . curl(curl u), evaluated from the latest available
    velocity (the end-of-stage estimate).
    """
    if ops.mesh.dim < 2:
        raise ValueError("rotational pressure condition needs dim >= 2")
    if not bdata.has_walls or nu == 0.0:
        return {f.name: np.zeros(f.dof_ids.size) for f in bdata.wall_faces}
    cc = _double_curl(ops, u)
    out = {}
    for f in bdata.wall_faces:
        vals = np.zeros(f.dof_ids.size)
        for k in range(ops.mesh.dim):
            if f.normal[k] != 0.0:
                vals += f.normal[k] * cc.data[k, f.dof_ids]
        out[f.name] = -nu * vals
    return out


def _face_weight_tensor(ops: GlobalOperators, face):
    w = ops.basis.quad_weights
    area_jac = 1.0
    wt = np.array([1.0])
    for ax in sorted(face.tangent_axes, reverse=True):  # (z, y, x) layout
        wt = np.multiply.outer(wt, w)
        area_jac *= ops.mesh.h_axes[ax] / 2.0
    return wt[0] * area_jac if wt.ndim > 1 else wt * area_jac


def _face_apply_mass(ops: GlobalOperators, face, nodal_on_face):
    """Surface-quadrature residual on one face: entry i = quad_face(l_i g)."""
    dim = ops.mesh.dim
    m = ops.basis.n_nodes
    nt = dim - 1
    if nt == 0:
        return nodal_on_face  # 1D: the face is a point with unit measure
    vals = nodal_on_face.reshape((-1,) + (m,) * nt)
    wt = _face_weight_tensor(ops, face)
    B, Bt = ops.basis.eval_matrix, ops.basis.eval_matrix.T
    out = vals
    if not ops.basis.collocated:
        for a in range(1, nt + 1):
            out = GlobalOperators._apply(B, out, a)
    out = out * wt
    if not ops.basis.collocated:
        for a in range(1, nt + 1):
            out = GlobalOperators._apply(Bt, out, a)
    return out.reshape(vals.shape[0], -1)


def poisson_boundary_term(ops: GlobalOperators, bdata: BoundaryData,
                          flux_by_face) -> ScalarField:
    """Accumulate the wall Neumann surface integral into a global residual."""
    out = np.zeros(ops.mesh.n_dofs)
    for f in bdata.wall_faces:
        flux = flux_by_face.get(f.name)
        if flux is None:
            continue
        full = np.zeros(ops.mesh.n_dofs)
        full[f.dof_ids] = flux
        nodal = full[f.elem_face_dofs]
        contrib = _face_apply_mass(ops, f, nodal)
        np.add.at(out, f.elem_face_dofs.ravel(), contrib.ravel())
    return ScalarField(ops.mesh, out)


def outflow_pressure_dirichlet(ops: GlobalOperators, bdata: BoundaryData,
                               u: VectorField, nu: float):
    """Pressure values on the outflow DoFs derived from the traction balance.

    p = nu n.((grad u + grad u^T) n) - |u|^2 S0(n.u) / 2 with the velocity
    gradient by lumped projection. Returns a full-length array, meaningful
    on ``bdata.outflow_dofs``.
    """
    mesh = ops.mesh
    vals = np.zeros(mesh.n_dofs)
    if not bdata.has_outflow:
        return vals
    cfg = bdata.outflow_cfg
    grads = None
    if nu != 0.0:
        grads = [ops.project_gradient(u.component(k)) for k in range(mesh.dim)]
    speed2 = np.sum(u.data**2, axis=0)
    for f in bdata.outflow_faces:
        ids = f.dof_ids
        n = f.normal
        u_n = np.zeros(ids.size)
        for k in range(mesh.dim):
            if n[k] != 0.0:
                u_n += n[k] * u.data[k, ids]
        s0 = dong_smoothing(u_n, cfg)
        p = -0.5 * speed2[ids] * s0
        if grads is not None:
            visc = np.zeros(ids.size)
            for k in range(mesh.dim):
                for m_ in range(mesh.dim):
                    if n[k] == 0.0 or n[m_] == 0.0:
                        continue
                    sym = grads[k].data[m_, ids] + grads[m_].data[k, ids]
                    visc += n[k] * n[m_] * sym
            p += nu * visc
        vals[ids] = p
    return vals


def normal_traction_pressure(ops: GlobalOperators, bdata: BoundaryData,
                             u: VectorField, nu: float):
    """Outflow pressure from the plain zero-traction balance (no backflow
    compensation); the general form must reduce to this when S0 is 0."""
    mesh = ops.mesh
    vals = np.zeros(mesh.n_dofs)
    if not bdata.has_outflow or nu == 0.0:
        return vals
    grads = [ops.project_gradient(u.component(k)) for k in range(mesh.dim)]
    for f in bdata.outflow_faces:
        ids = f.dof_ids
        n = f.normal
        visc = np.zeros(ids.size)
        for k in range(mesh.dim):
            for m_ in range(mesh.dim):
                if n[k] == 0.0 or n[m_] == 0.0:
                    continue
                visc += n[k] * n[m_] * (grads[k].data[m_, ids] + grads[m_].data[k, ids])
        vals[ids] = nu * visc
    return vals


def apply_velocity_dirichlet(u: VectorField, bdata: BoundaryData) -> VectorField:
    """Overwrite wall DoFs with the prescribed velocity (in place)."""
    if bdata.has_walls:
        ids = bdata.wall_dofs
        u.data[:, ids] = bdata.wall_values[:, ids]
    return u
