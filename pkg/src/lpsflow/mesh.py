"""Structured tensor-product meshes with shared global DoF numbering.

Axis-aligned boxes split into n_k uniform elements per axis, each carrying a
tensor-product nodal basis of order p. Global DoFs are numbered
lexicographically with x fastest (flat index = (iz*Ny + iy)*Nx + ix), and a
periodic axis identifies the DoF at b_k with the one at a_k.
"""

import enum

import numpy as np

from .basis import Basis1D, make_basis

__all__ = [
    "BoundaryTag",
    "BoundaryFace",
    "Mesh",
    "build_structured_mesh",
    "element_size",
    "periodic_tags",
    "wall_tags",
    "face_names",
]

_AXIS_NAMES = ("x", "y", "z")


class BoundaryTag(enum.Enum):
    PERIODIC = "periodic"
    DIRICHLET_WALL = "wall"
    OUTFLOW = "outflow"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(t.value for t in cls)
            raise ValueError(
                f"unknown boundary tag {value!r} (expected one of: {names})"
            ) from None


class MeshError(ValueError):
    """Invalid mesh construction request."""


def face_names(dim):
    """The 2*dim face-set names of a dim-dimensional box, e.g. 'x_min'."""
    names = []
    for k in range(dim):
        names.append(f"{_AXIS_NAMES[k]}_min")
        names.append(f"{_AXIS_NAMES[k]}_max")
    return names


def periodic_tags(dim):
    return {name: BoundaryTag.PERIODIC for name in face_names(dim)}


def wall_tags(dim):
    return {name: BoundaryTag.DIRICHLET_WALL for name in face_names(dim)}


class BoundaryFace:
    """One tagged non-periodic side of the box.

    Carries the global DoF ids on the face, the outward unit normal, and the
    per-element face structure used for surface quadrature: ``elem_ids`` are
    the adjacent element ids and ``elem_face_dofs[e]`` the global ids of that
    element's face nodes in tangential tensor order.
    """

    def __init__(self, name, axis, side, tag, dof_ids, normal, elem_ids,
                 elem_face_dofs, tangent_axes):
        self.name = name
        self.axis = axis
        self.side = side
        self.tag = tag
        self.dof_ids = dof_ids
        self.normal = normal
        self.elem_ids = elem_ids
        self.elem_face_dofs = elem_face_dofs
        self.tangent_axes = tangent_axes

    def __repr__(self):
        return (f"BoundaryFace({self.name}, tag={self.tag.value}, "
                f"ndofs={self.dof_ids.size})")


class Mesh:
    """Immutable structured mesh; see module docstring for numbering."""

    def __init__(self, dim, extents, elems_per_axis, order, spacing,
                 boundary_tags):
        self.dim = dim
        self.extents = tuple((float(a), float(b)) for a, b in extents)
        self.elems_per_axis = tuple(int(n) for n in elems_per_axis)
        self.order = int(order)
        self.spacing = spacing
        self.basis: Basis1D = make_basis(self.order, spacing)
        self.boundary_tags = boundary_tags  # face name -> BoundaryTag
        self.periodic = tuple(
            boundary_tags[f"{_AXIS_NAMES[k]}_min"] is BoundaryTag.PERIODIC
            for k in range(dim)
        )

        self.h_axes = tuple(
            (b - a) / n for (a, b), n in zip(self.extents, self.elems_per_axis)
        )
        self.dofs_per_axis = tuple(
            n * self.order + (0 if per else 1)
            for n, per in zip(self.elems_per_axis, self.periodic)
        )
        self.n_dofs = int(np.prod(self.dofs_per_axis))
        self.n_elems = int(np.prod(self.elems_per_axis))
        self.nodes_per_elem = (self.order + 1) ** dim

        self._axis_dof_maps = [self._axis_dof_map(k) for k in range(dim)]
        self._axis_coords = [self._axis_coordinates(k) for k in range(dim)]
        self.elem_to_dofs = self._build_elem_to_dofs()
        self.node_coords = self._build_node_coords()
        self.elem_origins = self._build_elem_origins()
        self.h_elem = np.full(self.n_elems, min(self.h_axes))
        self.boundary_faces = self._build_boundary_faces()

    # -- construction helpers -------------------------------------------------

    def _axis_dof_map(self, k):
        """(n_k, p+1) array of 1D DoF indices for every element on axis k."""
        n, p = self.elems_per_axis[k], self.order
        e = np.arange(n)[:, None]
        i = np.arange(p + 1)[None, :]
        ids = e * p + i
        if self.periodic[k]:
            ids = ids % (n * p)
        return ids

    def _axis_coordinates(self, k):
        """1D coordinates for every axis-k DoF index."""
        a, _ = self.extents[k]
        h = self.h_axes[k]
        ref = self.basis.nodes
        p = self.order
        u = np.arange(self.dofs_per_axis[k])
        # Canonical owner of DoF u is element u // p, local node u % p; the
        # non-periodic final DoF lands on b exactly since ref[0] = -1.
        return a + (u // p) * h + (ref[u % p] + 1.0) * (0.5 * h)

    def _build_elem_to_dofs(self):
        dim = self.dim
        shape_elems = self.elems_per_axis[::-1]  # (z, y, x) orders the flat id
        grids = np.meshgrid(
            *[np.arange(n) for n in shape_elems], indexing="ij"
        )
        # grids[j] is the element index along spatial axis dim-1-j.
        flat = [g.ravel() for g in grids]
        m = self.order + 1
        out = np.zeros((self.n_elems,) + (m,) * dim, dtype=np.int64)
        for j in range(dim):
            axis_k = dim - 1 - j
            amap = self._axis_dof_maps[axis_k][flat[j]]  # (n_elems, m)
            stride = int(np.prod(self.dofs_per_axis[:axis_k], dtype=np.int64))
            shape = [self.n_elems] + [1] * dim
            shape[1 + j] = m
            out = out + amap.reshape(shape) * stride
        return out.reshape(self.n_elems, self.nodes_per_elem)

    def _build_node_coords(self):
        axes = [self._axis_coords[k] for k in range(self.dim)]
        grids = np.meshgrid(*axes[::-1], indexing="ij")  # (z, y, x) order
        coords = np.stack([g.ravel() for g in grids[::-1]], axis=1)
        return coords

    def _build_elem_origins(self):
        grids = np.meshgrid(
            *[np.arange(n) for n in self.elems_per_axis[::-1]], indexing="ij"
        )
        origins = np.empty((self.n_elems, self.dim))
        for k in range(self.dim):
            a, _ = self.extents[k]
            e = grids[self.dim - 1 - k].ravel()
            origins[:, k] = a + e * self.h_axes[k]
        return origins

    def _build_boundary_faces(self):
        faces = {}
        for k in range(self.dim):
            if self.periodic[k]:
                continue
            for side in (0, 1):
                name = f"{_AXIS_NAMES[k]}_{'min' if side == 0 else 'max'}"
                tag = self.boundary_tags[name]
                faces[name] = self._make_face(name, k, side, tag)
        return faces

    def _make_face(self, name, axis, side, tag):
        dim, p = self.dim, self.order
        # Global DoFs with grid index 0 or N-1 along `axis`.
        idx1d = [np.arange(nk) for nk in self.dofs_per_axis]
        idx1d[axis] = np.array([0 if side == 0 else self.dofs_per_axis[axis] - 1])
        grids = np.meshgrid(*idx1d[::-1], indexing="ij")
        flat = np.zeros_like(grids[0])
        for k in range(dim):
            stride = int(np.prod(self.dofs_per_axis[:k], dtype=np.int64))
            flat = flat + grids[dim - 1 - k] * stride
        dof_ids = np.sort(flat.ravel())

        normal = np.zeros(dim)
        normal[axis] = -1.0 if side == 0 else 1.0

        # Elements adjacent to the face and their face-node slice.
        eidx1d = [np.arange(nk) for nk in self.elems_per_axis]
        eidx1d[axis] = np.array([0 if side == 0 else self.elems_per_axis[axis] - 1])
        egrids = np.meshgrid(*eidx1d[::-1], indexing="ij")
        eflat = np.zeros_like(egrids[0])
        for k in range(dim):
            stride = int(np.prod(self.elems_per_axis[:k], dtype=np.int64))
            eflat = eflat + egrids[dim - 1 - k] * stride
        elem_ids = eflat.ravel()

        m = p + 1
        local = self.elem_to_dofs[elem_ids].reshape((elem_ids.size,) + (m,) * dim)
        tensor_axis = 1 + (dim - 1 - axis)
        face_dofs = np.take(local, 0 if side == 0 else p, axis=tensor_axis)
        face_dofs = face_dofs.reshape(elem_ids.size, m ** (dim - 1))
        tangent_axes = tuple(k for k in range(dim) if k != axis)
        return BoundaryFace(name, axis, side, tag, dof_ids, normal, elem_ids,
                            face_dofs, tangent_axes)

    # -- queries ---------------------------------------------------------------

    @property
    def domain_volume(self):
        return float(np.prod([b - a for a, b in self.extents]))

    @property
    def elem_volume(self):
        return float(np.prod(self.h_axes))

    def __repr__(self):
        shape = "x".join(str(n) for n in self.elems_per_axis)
        return (f"Mesh(dim={self.dim}, elems={shape}, p={self.order}, "
                f"spacing={self.spacing}, ndofs={self.n_dofs})")


def build_structured_mesh(dim, extents, elems_per_axis, order, spacing,
                          boundary_tags):
    """Build a structured box mesh; see :class:`Mesh` for conventions.

    ``boundary_tags`` maps every face-set name ('x_min', 'x_max', ...) to a
    :class:`BoundaryTag` (or its string value). Periodic tags must be paired
    on both sides of an axis.
    """
    if dim not in (1, 2, 3):
        raise MeshError(f"dim must be 1, 2 or 3, got {dim}")
    if int(order) < 1:
        raise MeshError(f"polynomial order must be >= 1, got {order}")
    extents = list(extents)
    elems_per_axis = list(elems_per_axis)
    if len(extents) != dim or len(elems_per_axis) != dim:
        raise MeshError("extents and elems_per_axis must have one entry per axis")
    for k, ((a, b), n) in enumerate(zip(extents, elems_per_axis)):
        if not b > a:
            raise MeshError(f"axis {k}: extent [{a}, {b}] has zero or negative measure")
        if int(n) < 1:
            raise MeshError(f"axis {k}: need at least one element, got {n}")

    tags = {}
    for name, value in dict(boundary_tags).items():
        if name in tags:
            raise MeshError(f"face {name!r} tagged more than once")
        try:
            tags[name] = BoundaryTag.coerce(value)
        except ValueError as exc:
            raise MeshError(str(exc)) from None
    expected = set(face_names(dim))
    missing = expected - set(tags)
    extra = set(tags) - expected
    if missing:
        raise MeshError(f"missing boundary tags for faces: {sorted(missing)}")
    if extra:
        raise MeshError(f"tags given for nonexistent faces: {sorted(extra)}")
    for k in range(dim):
        lo = tags[f"{_AXIS_NAMES[k]}_min"]
        hi = tags[f"{_AXIS_NAMES[k]}_max"]
        if (lo is BoundaryTag.PERIODIC) != (hi is BoundaryTag.PERIODIC):
            raise MeshError(
                f"axis {_AXIS_NAMES[k]}: periodic tag must be set on both sides "
                f"(got {lo.value}/{hi.value})"
            )
        if lo is BoundaryTag.PERIODIC and int(elems_per_axis[k]) * int(order) < 2:
            raise MeshError(
                f"axis {_AXIS_NAMES[k]}: a periodic axis needs n*p >= 2"
            )

    return Mesh(dim, extents, elems_per_axis, order, spacing, tags)


def element_size(mesh, elem_id):
    """Element size h^e: the minimum edge length of the (box) element."""
    if not 0 <= elem_id < mesh.n_elems:
        raise IndexError(
            f"element id {elem_id} out of range [0, {mesh.n_elems})"
        )
    return float(mesh.h_elem[elem_id])
