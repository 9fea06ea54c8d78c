"""Persistence and interchange: MSH 2.2 import, legacy VTK export, run logs.

The Gmsh reader covers the ASCII MSH 2.2 subset needed to import externally
meshed geometries: nodes plus triangle/tetrahedron volume elements, with
lower-dimensional elements carrying physical tags that become boundary facet
tags.  The VTK writer emits legacy ASCII unstructured grids with fixed
formatting so identical inputs give byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .fem import ScalarField, VectorField
from .mesh import MeshError, SimplicialMesh, _facet_census

__all__ = [
    "GmshParseError",
    "read_gmsh",
    "write_gmsh",
    "write_vtk",
    "write_runlog_csv",
    "RUNLOG_COLUMNS",
]

RUNLOG_COLUMNS = ("i", "E", "E1", "E2", "inner_iters", "dts_l2", "err_n",
                  "s_min", "s_max", "n_max", "wall_s")

# MSH element types accepted by the reader
_MSH_LINE, _MSH_TRIANGLE, _MSH_TET, _MSH_POINT = 1, 2, 4, 15
_MSH_NODES_PER_TYPE = {_MSH_LINE: 2, _MSH_TRIANGLE: 3, _MSH_TET: 4, _MSH_POINT: 1}


class GmshParseError(ValueError):
    """Malformed or unsupported MSH input; messages carry line numbers."""


class _LineReader:
    def __init__(self, path):
        with open(path, "r", encoding="utf-8") as fh:
            self.lines = fh.read().splitlines()
        self.pos = 0

    @property
    def lineno(self) -> int:
        return self.pos  # 1-based number of the line just read

    def next(self) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                return line
        raise GmshParseError(f"line {len(self.lines)}: unexpected end of file")

    def eof(self) -> bool:
        return all(not l.strip() for l in self.lines[self.pos:])


def _parse_mesh_format(reader: _LineReader):
    line = reader.next()
    parts = line.split()
    if len(parts) < 2:
        raise GmshParseError(f"line {reader.lineno}: malformed $MeshFormat line {line!r}")
    if parts[0] != "2.2":
        raise GmshParseError(f"line {reader.lineno}: unsupported MSH version {parts[0]!r} "
                             "(only 2.2 ASCII)")
    if parts[1] != "0":
        raise GmshParseError(f"line {reader.lineno}: only ASCII MSH files are supported")
    end = reader.next()
    if end != "$EndMeshFormat":
        raise GmshParseError(f"line {reader.lineno}: expected $EndMeshFormat, got {end!r}")


def _parse_nodes(reader: _LineReader):
    try:
        count = int(reader.next())
    except ValueError:
        raise GmshParseError(f"line {reader.lineno}: bad node count") from None
    tags, coords = [], []
    for _ in range(count):
        parts = reader.next().split()
        if len(parts) != 4:
            raise GmshParseError(f"line {reader.lineno}: node line needs 'tag x y z'")
        try:
            tags.append(int(parts[0]))
            coords.append([float(p) for p in parts[1:]])
        except ValueError:
            raise GmshParseError(f"line {reader.lineno}: malformed node line") from None
    end = reader.next()
    if end != "$EndNodes":
        raise GmshParseError(f"line {reader.lineno}: expected $EndNodes, got {end!r}")
    return tags, np.asarray(coords, dtype=float)


def _parse_elements(reader: _LineReader):
    try:
        count = int(reader.next())
    except ValueError:
        raise GmshParseError(f"line {reader.lineno}: bad element count") from None
    elements = []  # (lineno, type, physical tag, node tags)
    for _ in range(count):
        parts = reader.next().split()
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise GmshParseError(f"line {reader.lineno}: malformed element line") from None
        if len(values) < 3:
            raise GmshParseError(f"line {reader.lineno}: element line too short")
        etype, ntags = values[1], values[2]
        if etype not in _MSH_NODES_PER_TYPE:
            raise GmshParseError(f"line {reader.lineno}: unsupported element type {etype}")
        nnodes = _MSH_NODES_PER_TYPE[etype]
        nodes = values[3 + ntags:]
        if len(nodes) != nnodes:
            raise GmshParseError(f"line {reader.lineno}: element type {etype} needs "
                                 f"{nnodes} nodes, got {len(nodes)}")
        phys = values[3] if ntags >= 1 else 0
        elements.append((reader.lineno, etype, phys, nodes))
    end = reader.next()
    if end != "$EndElements":
        raise GmshParseError(f"line {reader.lineno}: expected $EndElements, got {end!r}")
    return elements


def read_gmsh(path) -> SimplicialMesh:
    """Read a conforming triangle/tetrahedron mesh from an ASCII MSH 2.2 file.

    In a tetrahedral mesh, triangle elements tag boundary facets; in a
    triangle mesh, line elements do.  Boundary facets without a surface
    element get tag 0.  Orientation is normalized to positive volumes.
    """
    reader = _LineReader(path)
    header = reader.next()
    if header != "$MeshFormat":
        raise GmshParseError(f"line {reader.lineno}: file must start with $MeshFormat")
    _parse_mesh_format(reader)

    node_tags, node_coords, elements = None, None, None
    while not reader.eof():
        section = reader.next()
        if section == "$Nodes":
            node_tags, node_coords = _parse_nodes(reader)
        elif section == "$Elements":
            elements = _parse_elements(reader)
        elif section.startswith("$End"):
            raise GmshParseError(f"line {reader.lineno}: stray section end {section!r}")
        elif section.startswith("$"):
            endmark = "$End" + section[1:]
            while reader.next() != endmark:
                pass
        else:
            raise GmshParseError(f"line {reader.lineno}: unexpected content {section!r}")
    if node_tags is None:
        raise GmshParseError("missing $Nodes section")
    if elements is None:
        raise GmshParseError("missing $Elements section")

    tag_to_idx = {t: i for i, t in enumerate(node_tags)}
    if len(tag_to_idx) != len(node_tags):
        raise GmshParseError("duplicate node tags")

    tets = [(ln, phys, nodes) for ln, et, phys, nodes in elements if et == _MSH_TET]
    tris = [(ln, phys, nodes) for ln, et, phys, nodes in elements if et == _MSH_TRIANGLE]
    lines = [(ln, phys, nodes) for ln, et, phys, nodes in elements if et == _MSH_LINE]

    if tets:
        dim, cell_elems, facet_elems = 3, tets, tris
    elif tris:
        dim, cell_elems, facet_elems = 2, tris, lines
        if np.max(np.abs(node_coords[:, 2]), initial=0.0) > 1e-9:
            raise GmshParseError("triangle mesh with nonzero z coordinates")
    else:
        raise GmshParseError("no triangle or tetrahedron elements found")

    def resolve(nodes, ln):
        try:
            return [tag_to_idx[t] for t in nodes]
        except KeyError as exc:
            raise GmshParseError(f"line {ln}: unknown node tag {exc.args[0]}") from None

    cells = np.array([resolve(nodes, ln) for ln, _, nodes in cell_elems], dtype=np.int64)
    cell_lines = np.array([ln for ln, _, _ in cell_elems])

    # keep only vertices referenced by cells, in first-use order of the file
    used = np.unique(cells)
    remap = -np.ones(len(node_tags), dtype=np.int64)
    remap[used] = np.arange(len(used))
    cells = remap[cells]
    vertices = node_coords[used, :dim]

    # zero-volume pre-check so the offending source line can be reported
    X = vertices[cells]
    edges = X[:, 1:, :] - X[:, :1, :]
    det = np.linalg.det(edges)
    scale = np.maximum(np.max(np.abs(edges), axis=(1, 2)) ** dim, 1e-300)
    bad = np.flatnonzero(np.abs(det) <= 1e-12 * scale)
    if len(bad):
        raise GmshParseError(f"line {cell_lines[bad[0]]}: zero-volume cell")

    facets, counts = _facet_census(cells)
    if counts.max(initial=1) > 2:
        over = facets[np.argmax(counts)]
        raise GmshParseError(f"non-conforming mesh: facet {over.tolist()} shared by "
                             f"{counts.max()} cells")
    boundary = facets[counts == 1]
    index = {tuple(f): i for i, f in enumerate(boundary)}
    tags = np.zeros(len(boundary), dtype=np.int64)
    for ln, phys, nodes in facet_elems:
        key = tuple(sorted(remap[resolve(nodes, ln)]))
        if min(key) < 0:
            raise GmshParseError(f"line {ln}: surface element references an unused node")
        where = index.get(key)
        if where is None:
            raise GmshParseError(f"line {ln}: surface element is not a boundary facet")
        tags[where] = phys

    try:
        return SimplicialMesh(vertices, cells, boundary, tags)
    except MeshError as exc:
        raise GmshParseError(str(exc)) from exc


def write_gmsh(path, mesh: SimplicialMesh) -> None:
    """Write a mesh as ASCII MSH 2.2 (round-trip fixture for the reader)."""
    etype = _MSH_TRIANGLE if mesh.dim == 2 else _MSH_TET
    ftype = _MSH_LINE if mesh.dim == 2 else _MSH_TRIANGLE
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n{mesh.num_vertices}\n")
        for i, v in enumerate(mesh.vertices, start=1):
            x, y = float(v[0]), float(v[1])
            z = float(v[2]) if mesh.dim == 3 else 0.0
            fh.write(f"{i} {x:.17g} {y:.17g} {z:.17g}\n")
        fh.write("$EndNodes\n")
        total = mesh.num_cells + len(mesh.boundary_facets)
        fh.write(f"$Elements\n{total}\n")
        num = 1
        for facet, tag in zip(mesh.boundary_facets, mesh.boundary_tags):
            nodes = " ".join(str(v + 1) for v in facet)
            fh.write(f"{num} {ftype} 2 {tag} {tag} {nodes}\n")
            num += 1
        for cell in mesh.cells:
            nodes = " ".join(str(v + 1) for v in cell)
            fh.write(f"{num} {etype} 2 0 0 {nodes}\n")
            num += 1
        fh.write("$EndElements\n")


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def write_vtk(path, mesh: SimplicialMesh, fields=()) -> None:
    """Write mesh and nodal fields as a legacy ASCII VTK unstructured grid.

    fields is a sequence of (name, ScalarField | VectorField) pairs; scalars
    become SCALARS records, vectors VECTORS records (z-padded in 2D).
    """
    if isinstance(fields, dict):
        fields = list(fields.items())
    for name, f in fields:
        if f.mesh is not mesh:
            raise ValueError(f"field {name!r} lives on a different mesh")

    vtk_type = 5 if mesh.dim == 2 else 10
    nloc = mesh.dim + 1
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("ericksen fields\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_vertices} double\n")
        for v in mesh.vertices:
            z = v[2] if mesh.dim == 3 else 0.0
            fh.write(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(z)}\n")
        fh.write(f"CELLS {mesh.num_cells} {mesh.num_cells * (nloc + 1)}\n")
        for cell in mesh.cells:
            fh.write(f"{nloc} " + " ".join(str(v) for v in cell) + "\n")
        fh.write(f"CELL_TYPES {mesh.num_cells}\n")
        for _ in range(mesh.num_cells):
            fh.write(f"{vtk_type}\n")
        if fields:
            fh.write(f"POINT_DATA {mesh.num_vertices}\n")
            for name, f in fields:
                if isinstance(f, ScalarField):
                    fh.write(f"SCALARS {name} double 1\n")
                    fh.write("LOOKUP_TABLE default\n")
                    for val in f.coeffs:
                        fh.write(f"{_fmt(val)}\n")
                elif isinstance(f, VectorField):
                    fh.write(f"VECTORS {name} double\n")
                    for row in f.coeffs:
                        z = row[2] if mesh.dim == 3 else 0.0
                        fh.write(f"{_fmt(row[0])} {_fmt(row[1])} {_fmt(z)}\n")
                else:
                    raise ValueError(f"field {name!r} is neither scalar nor vector")


def write_runlog_csv(path, records) -> None:
    """Write per-outer-iteration records with the fixed runlog header.

    Floats carry 15 significant digits; rows must be non-empty with strictly
    increasing iteration indices.
    """
    records = list(records)
    if not records:
        raise ValueError("empty run log")
    idx = [r.i for r in records]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise ValueError("run log rows must be strictly increasing in i")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(RUNLOG_COLUMNS) + "\n")
        for r in records:
            row = [str(int(r.i)), format(r.energy, ".15g"), format(r.e1, ".15g"),
                   format(r.e2, ".15g"), str(int(r.inner_iters)),
                   format(r.dts_l2, ".15g"), format(r.err_n, ".15g"),
                   format(r.s_min, ".15g"), format(r.s_max, ".15g"),
                   format(r.n_max, ".15g"), format(r.wall_s, ".15g")]
            fh.write(",".join(row) + "\n")
