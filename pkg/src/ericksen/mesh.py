"""Simplicial meshes in 2D/3D: structured generators and geometry caches.

A :class:`SimplicialMesh` stores triangles (d=2) or tetrahedra (d=3) together
with tagged boundary facets and the per-cell quantities needed by P1 assembly:
cell measures, barycentric-function gradients and diameters.  Meshes are
immutable after construction and validated for conformity (every interior
facet shared by exactly two cells).
"""

from __future__ import annotations

import itertools

import numpy as np

__all__ = [
    "MeshError",
    "SimplicialMesh",
    "generate_unit_square",
    "generate_unit_cube",
    "generate_cylinder",
    "shape_regularity",
    "boundary_vertices",
]


class MeshError(ValueError):
    """Invalid mesh data or generator parameters."""


def _facet_census(cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All (d)-vertex facets of the cell array with multiplicities.

    Returns (facets, counts) where facets has sorted vertex indices per row
    and counts gives how many cells share each facet.
    """
    nloc = cells.shape[1]
    local = [tuple(j for j in range(nloc) if j != i) for i in range(nloc)]
    stacked = np.concatenate([cells[:, idx] for idx in local], axis=0)
    stacked = np.sort(stacked, axis=1)
    facets, counts = np.unique(stacked, axis=0, return_counts=True)
    return facets, counts


class SimplicialMesh:
    """Conforming simplicial mesh with tagged boundary facets.

    Parameters
    ----------
    vertices : (nv, d) array
        Vertex coordinates, d in {2, 3}.
    cells : (nc, d+1) int array
        Vertex indices per cell.  Orientation is normalized so that all cell
        volumes are positive.
    boundary_facets : (nb, d) int array, optional
        Facets on the topological boundary.  If omitted they are derived from
        the cell complex and tagged 0.
    boundary_tags : (nb,) int array, optional
        One integer tag per boundary facet.
    """

    def __init__(self, vertices, cells, boundary_facets=None, boundary_tags=None):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        cells = np.ascontiguousarray(cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise MeshError("vertices must be an (nv, d) array with d in {2, 3}")
        dim = vertices.shape[1]
        if cells.ndim != 2 or cells.shape[1] != dim + 1:
            raise MeshError(f"cells must be (nc, {dim + 1}) for d={dim}")
        if cells.size == 0:
            raise MeshError("mesh has no cells")
        if cells.min() < 0 or cells.max() >= len(vertices):
            raise MeshError("cell vertex index out of range")
        if not np.isfinite(vertices).all():
            raise MeshError("non-finite vertex coordinates")

        self.dim = dim
        self.vertices = vertices
        self.cells = self._normalize_orientation(vertices, cells)

        census_facets, counts = _facet_census(self.cells)
        if counts.max() > 2:
            raise MeshError("non-conforming mesh: a facet is shared by more than 2 cells")
        derived = census_facets[counts == 1]

        if boundary_facets is None:
            boundary_facets = derived
            boundary_tags = np.zeros(len(derived), dtype=np.int64)
        else:
            boundary_facets = np.ascontiguousarray(boundary_facets, dtype=np.int64)
            if boundary_tags is None:
                boundary_tags = np.zeros(len(boundary_facets), dtype=np.int64)
            boundary_tags = np.ascontiguousarray(boundary_tags, dtype=np.int64)
            if boundary_facets.shape != (len(boundary_tags), dim):
                raise MeshError("boundary facet/tag arrays have inconsistent shapes")
            given = {tuple(f) for f in np.sort(boundary_facets, axis=1)}
            actual = {tuple(f) for f in derived}
            if given != actual:
                raise MeshError(
                    "boundary facets do not match the topological boundary "
                    f"({len(given)} given vs {len(actual)} derived)"
                )
        self.boundary_facets = boundary_facets
        self.boundary_tags = boundary_tags

        self._compute_geometry()
        for arr in (self.vertices, self.cells, self.boundary_facets, self.boundary_tags,
                    self.cell_volume, self.cell_grads, self.h_K, self.h_z):
            arr.setflags(write=False)

    @staticmethod
    def _normalize_orientation(vertices, cells):
        d = vertices.shape[1]
        edges = vertices[cells[:, 1:]] - vertices[cells[:, :1]]  # (nc, d, d)
        det = np.linalg.det(edges)
        scale = np.max(np.abs(edges), axis=(1, 2)) ** d
        if np.any(np.abs(det) <= 1e-12 * np.maximum(scale, 1e-300)):
            bad = int(np.argmin(np.abs(det) / np.maximum(scale, 1e-300)))
            raise MeshError(f"zero-volume cell {bad}")
        flip = det < 0
        if flip.any():
            cells = cells.copy()
            cells[flip, 0], cells[flip, 1] = cells[flip, 1], cells[flip, 0].copy()
        return cells

    def _compute_geometry(self):
        d = self.dim
        X = self.vertices[self.cells]                    # (nc, d+1, d)
        edges = X[:, 1:, :] - X[:, :1, :]                # (nc, d, d) rows = X_j - X_0
        det = np.linalg.det(edges)
        fact = float(np.prod(range(1, d + 1)))
        self.cell_volume = det / fact
        # barycentric gradient of lambda_j (j=1..d) = row j-1 of edges^{-T};
        # see x - X_0 = sum_j lambda_j (X_j - X_0).
        inv = np.linalg.inv(np.swapaxes(edges, 1, 2))    # (nc, d, d) = edges^{-T}... rows
        grads = np.empty((len(self.cells), d + 1, d))
        grads[:, 1:, :] = inv
        grads[:, 0, :] = -inv.sum(axis=1)
        self.cell_grads = grads
        # diameters
        diffs = X[:, :, None, :] - X[:, None, :, :]
        self.h_K = np.sqrt((diffs ** 2).sum(axis=-1)).max(axis=(1, 2))
        self.h_min = float(self.h_K.min())
        self.h_max = float(self.h_K.max())
        # per-vertex patch diameter: max h_K over incident cells
        h_z = np.zeros(len(self.vertices))
        for j in range(d + 1):
            np.maximum.at(h_z, self.cells[:, j], self.h_K)
        self.h_z = h_z

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def tag_census(self) -> dict[int, int]:
        """Count of boundary facets per tag."""
        tags, counts = np.unique(self.boundary_tags, return_counts=True)
        return {int(t): int(c) for t, c in zip(tags, counts)}

    def __repr__(self):
        return (f"SimplicialMesh(dim={self.dim}, vertices={self.num_vertices}, "
                f"cells={self.num_cells}, h=[{self.h_min:.4g}, {self.h_max:.4g}])")


def _tag_facets(vertices, cells, tag_fn):
    """Derive boundary facets from the census and tag them geometrically."""
    facets, counts = _facet_census(cells)
    boundary = facets[counts == 1]
    tags = np.array([tag_fn(vertices[f]) for f in boundary], dtype=np.int64)
    return boundary, tags


def generate_unit_square(n: int) -> SimplicialMesh:
    """Uniform right-triangle mesh of the unit square.

    The square is cut into n x n subsquares, each split along the same
    diagonal into two right triangles: 2 n^2 cells with h = sqrt(2)/n.  All
    boundary facets carry tag 1.
    """
    if n < 1:
        raise MeshError("generate_unit_square requires n >= 1")
    n = int(n)
    coords = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.concatenate([lower, upper], axis=0)

    facets, tags = _tag_facets(vertices, cells, lambda xs: 1)
    return SimplicialMesh(vertices, cells, facets, tags)


# faces of the unit cube: tag -> (coordinate axis, value)
_CUBE_FACES = [(1, 2, 0.0), (2, 2, 1.0), (3, 0, 0.0), (4, 0, 1.0), (5, 1, 0.0), (6, 1, 1.0)]


def generate_unit_cube(n: int) -> SimplicialMesh:
    """Kuhn subdivision of the unit cube: 6 n^3 tetrahedra, h = sqrt(3)/n.

    Every subcube is split into six tetrahedra along the same main diagonal,
    which keeps the global mesh conforming.  Boundary tags: 1=z0, 2=z1,
    3=x0, 4=x1, 5=y0, 6=y1.
    """
    if n < 1:
        raise MeshError("generate_unit_cube requires n >= 1")
    n = int(n)
    coords = np.linspace(0.0, 1.0, n + 1)
    Z, Y, X = np.meshgrid(coords, coords, coords, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(ix, iy, iz):
        return (iz * (n + 1) + iy) * (n + 1) + ix

    base = np.arange(n)
    IX, IY, IZ = np.meshgrid(base, base, base, indexing="ij")
    ix, iy, iz = IX.ravel(), IY.ravel(), IZ.ravel()
    strides = np.array([1, n + 1, (n + 1) ** 2])
    corner = vid(ix, iy, iz)

    cell_list = []
    for perm in itertools.permutations(range(3)):
        p0 = corner
        p1 = p0 + strides[perm[0]]
        p2 = p1 + strides[perm[1]]
        p3 = p2 + strides[perm[2]]
        cell_list.append(np.column_stack([p0, p1, p2, p3]))
    cells = np.concatenate(cell_list, axis=0)

    def face_tag(xs, tol=1e-12):
        for tag, axis, value in _CUBE_FACES:
            if np.all(np.abs(xs[:, axis] - value) < tol):
                return tag
        raise MeshError("boundary facet not on a cube face")

    facets, tags = _tag_facets(vertices, cells, face_tag)
    return SimplicialMesh(vertices, cells, facets, tags)


def generate_cylinder(n_r: int, n_theta: int, n_z: int) -> SimplicialMesh:
    """Structured tetrahedral mesh of the cylinder of radius 0.5 about
    the axis (0.5, 0.5, z) with 0 < z < 1.

    A polar disk triangulation (n_r rings, n_theta sectors) is extruded into
    n_z prism layers; each prism is split into three tetrahedra with
    index-ordered diagonals so the mesh is conforming.  Boundary tags:
    1=lateral, 2=bottom (z=0), 3=top (z=1).
    """
    if n_r < 1 or n_theta < 3 or n_z < 1:
        raise MeshError("generate_cylinder requires n_r >= 1, n_theta >= 3, n_z >= 1")
    n_r, n_theta, n_z = int(n_r), int(n_theta), int(n_z)
    radius, cx, cy = 0.5, 0.5, 0.5

    # one disk layer: center point + n_r rings of n_theta points
    angles = 2.0 * np.pi * np.arange(n_theta) / n_theta
    layer_xy = [np.array([[cx, cy]])]
    for ring in range(1, n_r + 1):
        r = radius * ring / n_r
        layer_xy.append(np.column_stack([cx + r * np.cos(angles), cy + r * np.sin(angles)]))
    layer_xy = np.concatenate(layer_xy, axis=0)
    layer_size = len(layer_xy)

    def ring_id(ring, j):
        return 1 + (ring - 1) * n_theta + (j % n_theta)

    tris = []
    for j in range(n_theta):
        tris.append((0, ring_id(1, j), ring_id(1, j + 1)))
    for ring in range(1, n_r):
        for j in range(n_theta):
            a0, a1 = ring_id(ring, j), ring_id(ring, j + 1)
            b0, b1 = ring_id(ring + 1, j), ring_id(ring + 1, j + 1)
            tris.append((a0, a1, b1))
            tris.append((a0, b1, b0))
    tris = np.asarray(tris, dtype=np.int64)

    zs = np.linspace(0.0, 1.0, n_z + 1)
    vertices = np.concatenate(
        [np.column_stack([layer_xy, np.full(layer_size, z)]) for z in zs], axis=0
    )

    cells = []
    for k in range(n_z):
        off = k * layer_size
        for tri in tris:
            a, b, c = np.sort(tri) + off
            A, B, C = a + layer_size, b + layer_size, c + layer_size
            # prism split with diagonals from the lowest-index bottom vertex
            cells.append((a, b, c, C))
            cells.append((a, b, C, B))
            cells.append((a, B, C, A))
    cells = np.asarray(cells, dtype=np.int64)

    def cyl_tag(xs, tol=1e-9):
        if np.all(np.abs(xs[:, 2]) < tol):
            return 2
        if np.all(np.abs(xs[:, 2] - 1.0) < tol):
            return 3
        rr = np.hypot(xs[:, 0] - cx, xs[:, 1] - cy)
        if np.all(np.abs(rr - radius) < tol):
            return 1
        raise MeshError("boundary facet of cylinder mesh not classifiable")

    facets, tags = _tag_facets(vertices, cells, cyl_tag)
    return SimplicialMesh(vertices, cells, facets, tags)


def _facet_measures(mesh: SimplicialMesh) -> np.ndarray:
    """(nc, d+1) measures of the facets opposite each cell vertex."""
    X = mesh.vertices[mesh.cells]
    d = mesh.dim
    out = np.empty((mesh.num_cells, d + 1))
    for i in range(d + 1):
        idx = [j for j in range(d + 1) if j != i]
        F = X[:, idx, :]
        if d == 2:
            out[:, i] = np.linalg.norm(F[:, 1] - F[:, 0], axis=1)
        else:
            cr = np.cross(F[:, 1] - F[:, 0], F[:, 2] - F[:, 0])
            out[:, i] = 0.5 * np.linalg.norm(cr, axis=1)
    return out


def shape_regularity(mesh: SimplicialMesh) -> float:
    """Worst-cell aspect measure max_K h_K / inradius_K."""
    surf = _facet_measures(mesh).sum(axis=1)
    inradius = mesh.dim * mesh.cell_volume / surf
    return float(np.max(mesh.h_K / inradius))


def boundary_vertices(mesh: SimplicialMesh, tags) -> np.ndarray:
    """Sorted indices of vertices on boundary facets with a tag in `tags`.

    Raises MeshError for an empty tag set or a tag absent from the mesh.
    """
    tags = set(int(t) for t in tags)
    if not tags:
        raise MeshError("empty tag set")
    present = set(int(t) for t in np.unique(mesh.boundary_tags))
    unknown = tags - present
    if unknown:
        raise MeshError(f"unknown boundary tags {sorted(unknown)}; mesh has {sorted(present)}")
    mask = np.isin(mesh.boundary_tags, sorted(tags))
    return np.unique(mesh.boundary_facets[mask])
