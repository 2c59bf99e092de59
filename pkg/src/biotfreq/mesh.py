"""Simplicial meshes with tagged boundary facets and per-cell region labels.

Meshes are plain triangle (2D) or tetrahedron (3D) meshes. Boundary facets
carry a tag (a string for generated meshes, a physical-group id for Gmsh
files) used to attach boundary conditions; cells carry an integer region
label used for region-wise material parameters (default region 0).

Structured generators for the unit square / unit cube and a reader for a
subset of the ASCII Gmsh MSH format (v2.2 and v4.1) are provided.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


class MeshError(Exception):
    """Invalid mesh data or unreadable mesh file."""


# Vertex tuples of the codimension-1 faces of the reference simplex,
# listed so face i is opposite vertex i.
_FACES = {
    2: [(1, 2), (0, 2), (0, 1)],
    3: [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)],
}

_FACTORIAL = {1: 1.0, 2: 2.0, 3: 6.0}


@dataclass
class Mesh:
    """Simplicial mesh.

    Attributes
    ----------
    dim : int
        Spatial dimension (2 or 3).
    vertices : (n_vertices, dim) float array
        Vertex coordinates in cm.
    cells : (n_cells, dim+1) int array
        Vertex indices per cell, oriented with positive signed measure.
    boundary_facets : (n_facets, dim) int array
        Vertex indices per boundary facet.
    facet_tags : list
        One tag per boundary facet (str or int).
    cell_regions : (n_cells,) int array
        Region label per cell.
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: np.ndarray
    facet_tags: list
    cell_regions: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        self.boundary_facets = np.ascontiguousarray(self.boundary_facets, dtype=np.int64)
        if self.cell_regions is None:
            self.cell_regions = np.zeros(len(self.cells), dtype=np.int64)
        else:
            self.cell_regions = np.ascontiguousarray(self.cell_regions, dtype=np.int64)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_facets(self) -> int:
        return self.boundary_facets.shape[0]

    def tags(self) -> set:
        return set(self.facet_tags)

    def facets_with_tag(self, tag) -> np.ndarray:
        """Indices into boundary_facets carrying the given tag."""
        return np.array([i for i, t in enumerate(self.facet_tags) if t == tag],
                        dtype=np.int64)


@dataclass
class GeomCache:
    """Per-cell affine map data and per-facet geometry.

    jac[c] has columns v_i - v_0 of cell c; det[c] > 0; inv_jac[c] maps
    physical displacements back to reference coordinates.  Facet normals
    are outward unit vectors of the owning cell.
    """

    jac: np.ndarray            # (n_cells, dim, dim)
    det: np.ndarray            # (n_cells,)
    inv_jac: np.ndarray        # (n_cells, dim, dim)
    diameters: np.ndarray      # (n_cells,) h_T = max vertex-pair distance
    cell_measure: np.ndarray   # (n_cells,)
    cell_origin: np.ndarray    # (n_cells, dim) coordinates of local vertex 0
    facet_normals: np.ndarray  # (n_facets, dim) outward unit normals
    facet_measure: np.ndarray  # (n_facets,)
    facet_cells: np.ndarray    # (n_facets,) owning cell index

    @property
    def h_max(self) -> float:
        return float(self.diameters.max())

    @property
    def h_min(self) -> float:
        return float(self.diameters.min())


def _signed_measures(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    v0 = vertices[cells[:, 0]]
    edges = vertices[cells[:, 1:]] - v0[:, None, :]      # (n_c, dim, dim)
    det = np.linalg.det(np.swapaxes(edges, 1, 2))
    return det / _FACTORIAL[cells.shape[1] - 1]


def _orient_cells(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Swap the last two vertices of negatively oriented cells."""
    cells = cells.copy()
    neg = _signed_measures(vertices, cells) < 0.0
    cells[neg, -2], cells[neg, -1] = cells[neg, -1].copy(), cells[neg, -2].copy()
    return cells


def _boundary_face_map(cells: np.ndarray, dim: int) -> dict:
    """Map sorted vertex tuple -> owning cell, for faces owned by one cell."""
    count: dict = {}
    for c, cell in enumerate(cells):
        for face in _FACES[dim]:
            key = tuple(sorted(cell[list(face)]))
            if key in count:
                count[key] = None          # interior face
            else:
                count[key] = c
    return {k: c for k, c in count.items() if c is not None}


def build_geometry(mesh: Mesh) -> GeomCache:
    """Compute affine maps, diameters, and facet normals; validates orientation."""
    verts, cells = mesh.vertices, mesh.cells
    v0 = verts[cells[:, 0]]
    jac = np.swapaxes(verts[cells[:, 1:]] - v0[:, None, :], 1, 2)  # columns = edges
    det = np.linalg.det(jac)
    if np.any(det <= 0.0):
        raise MeshError("cell with nonpositive signed measure (inverted cell)")
    inv_jac = np.linalg.inv(jac)

    # h_T: max pairwise vertex distance
    pts = verts[cells]                                   # (n_c, dim+1, dim)
    pair = pts[:, :, None, :] - pts[:, None, :, :]
    diameters = np.sqrt((pair ** 2).sum(-1)).max(axis=(1, 2))

    measure = det / _FACTORIAL[mesh.dim]

    owners = _boundary_face_map(cells, mesh.dim)
    normals = np.zeros((mesh.n_facets, mesh.dim))
    fmeasure = np.zeros(mesh.n_facets)
    fcells = np.zeros(mesh.n_facets, dtype=np.int64)
    cell_centroids = pts.mean(axis=1)
    for i, facet in enumerate(mesh.boundary_facets):
        key = tuple(sorted(facet))
        if key not in owners:
            raise MeshError(f"boundary facet {tuple(facet)} is not a face of exactly one cell")
        c = owners[key]
        fcells[i] = c
        fv = verts[facet]
        if mesh.dim == 2:
            t = fv[1] - fv[0]
            fmeasure[i] = np.linalg.norm(t)
            n = np.array([t[1], -t[0]])
        else:
            cr = np.cross(fv[1] - fv[0], fv[2] - fv[0])
            fmeasure[i] = 0.5 * np.linalg.norm(cr)
            n = cr
        if fmeasure[i] <= 0.0:
            raise MeshError(f"degenerate boundary facet {tuple(facet)}")
        n = n / np.linalg.norm(n)
        if np.dot(n, fv.mean(axis=0) - cell_centroids[c]) < 0.0:
            n = -n
        normals[i] = n

    # the tagged facets must cover the whole topological boundary
    tagged = {tuple(sorted(f)) for f in mesh.boundary_facets}
    missing = set(owners) - tagged
    if missing:
        raise MeshError(f"{len(missing)} topological boundary facet(s) carry no tag")
    if len(tagged) != mesh.n_facets:
        raise MeshError("duplicate boundary facet")

    return GeomCache(jac=jac, det=det, inv_jac=inv_jac, diameters=diameters,
                     cell_measure=measure, cell_origin=v0,
                     facet_normals=normals, facet_measure=fmeasure,
                     facet_cells=fcells)


def validate_mesh(mesh: Mesh) -> None:
    """Check index ranges, orientation, and boundary consistency."""
    if mesh.dim not in (2, 3):
        raise MeshError(f"unsupported dimension {mesh.dim}")
    if mesh.cells.shape[1] != mesh.dim + 1:
        raise MeshError("cell connectivity does not match dimension")
    for arr, what in ((mesh.cells, "cell"), (mesh.boundary_facets, "facet")):
        if arr.size and (arr.min() < 0 or arr.max() >= mesh.n_vertices):
            raise MeshError(f"{what} references a vertex out of range "
                            "(dangling vertex reference)")
    if len(mesh.facet_tags) != mesh.n_facets:
        raise MeshError("facet tag count does not match facet count")
    if len(mesh.cell_regions) != mesh.n_cells:
        raise MeshError("cell region count does not match cell count")
    build_geometry(mesh)   # orientation + facet checks


def _extract_boundary(vertices, cells, dim, tag_of_facet):
    """Build boundary facet arrays from the cell incidence, tagging each facet."""
    owners = _boundary_face_map(cells, dim)
    facets, tags = [], []
    for key in sorted(owners):
        facets.append(key)
        tags.append(tag_of_facet(np.asarray(key)))
    return np.array(facets, dtype=np.int64), tags


def generate_unit_square(n: int) -> Mesh:
    """Structured triangulation of [0,1]^2 with 2*n^2 cells.

    Each grid square is split along the lexicographic diagonal.  Boundary
    facets are tagged 'left', 'right', 'bottom', 'top'.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(ix, iy):
        return iy * (n + 1) + ix

    cells = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    cells = _orient_cells(vertices, np.array(cells, dtype=np.int64))

    def tag(facet):
        fv = vertices[facet]
        for coord, lo, hi in ((0, "left", "right"), (1, "bottom", "top")):
            if np.all(np.abs(fv[:, coord]) < 1e-14):
                return lo
            if np.all(np.abs(fv[:, coord] - 1.0) < 1e-14):
                return hi
        raise MeshError("boundary facet not on the unit-square boundary")

    facets, tags = _extract_boundary(vertices, cells, 2, tag)
    mesh = Mesh(2, vertices, cells, facets, tags)
    validate_mesh(mesh)
    return mesh


def generate_unit_cube(n: int) -> Mesh:
    """Structured tetrahedralization of [0,1]^3 with 6*n^3 cells.

    Each grid cube is split into six tetrahedra (one per axis permutation,
    all sharing the main diagonal).  Boundary facets are tagged
    'x0', 'x1', 'y0', 'y1', 'z0', 'z1'.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(xs, xs, xs, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(ix, iy, iz):
        return (ix * (n + 1) + iy) * (n + 1) + iz

    perms = list(itertools.permutations(range(3)))
    cells = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                base = np.array([i, j, k])
                for perm in perms:
                    corner = base.copy()
                    path = [vid(*corner)]
                    for axis in perm:
                        corner = corner.copy()
                        corner[axis] += 1
                        path.append(vid(*corner))
                    cells.append(tuple(path))
    cells = _orient_cells(vertices, np.array(cells, dtype=np.int64))

    names = {0: ("x0", "x1"), 1: ("y0", "y1"), 2: ("z0", "z1")}

    def tag(facet):
        fv = vertices[facet]
        for coord in range(3):
            if np.all(np.abs(fv[:, coord]) < 1e-14):
                return names[coord][0]
            if np.all(np.abs(fv[:, coord] - 1.0) < 1e-14):
                return names[coord][1]
        raise MeshError("boundary facet not on the unit-cube boundary")

    facets, tags = _extract_boundary(vertices, cells, 3, tag)
    mesh = Mesh(3, vertices, cells, facets, tags)
    validate_mesh(mesh)
    return mesh


@dataclass
class MeshStats:
    h_max: float
    h_min: float
    n_cells: int
    n_vertices: int
    total_measure: float


def mesh_statistics(mesh: Mesh, geom: GeomCache | None = None) -> MeshStats:
    """Element diameter range, entity counts, and total measure."""
    if geom is None:
        geom = build_geometry(mesh)
    return MeshStats(h_max=geom.h_max, h_min=geom.h_min,
                     n_cells=mesh.n_cells, n_vertices=mesh.n_vertices,
                     total_measure=float(geom.cell_measure.sum()))


# ---------------------------------------------------------------------------
# Gmsh MSH reader (ASCII v2.2 and v4.1, subset: lines / triangles / tets)
# ---------------------------------------------------------------------------

_GMSH_TYPE_DIM = {1: 1, 2: 2, 4: 3, 15: 0}
_GMSH_TYPE_NODES = {1: 2, 2: 3, 4: 4, 15: 1}


class _LineReader:
    def __init__(self, path):
        with open(path, "r") as fh:
            self.lines = fh.read().splitlines()
        self.i = 0

    def next(self) -> str:
        while self.i < len(self.lines):
            line = self.lines[self.i].strip()
            self.i += 1
            if line:
                return line
        raise MeshError(f"line {self.i}: unexpected end of file")

    def error(self, msg: str) -> MeshError:
        return MeshError(f"line {self.i}: {msg}")


def read_gmsh(path) -> Mesh:
    """Read an ASCII Gmsh MSH file (v2.2 or v4.1 subset).

    Supported elements: 2-node lines, 3-node triangles, 4-node tetrahedra
    (1-node points are skipped).  Physical-group ids of codimension-1
    elements become boundary tags; those of codimension-0 elements become
    cell region labels (0 when absent).
    """
    rd = _LineReader(path)
    line = rd.next()
    if line != "$MeshFormat":
        raise rd.error("expected $MeshFormat")
    fmt = rd.next().split()
    version, file_type = fmt[0], int(fmt[1])
    if file_type != 0:
        raise rd.error("binary MSH files are not supported")
    if version.startswith("2."):
        nodes, elements = _parse_msh2(rd)
    elif version == "4.1":
        nodes, elements = _parse_msh41(rd)
    else:
        raise rd.error(f"unsupported MSH version {version}")

    if not nodes:
        raise MeshError("no nodes in file")
    node_index = {tag: i for i, tag in enumerate(nodes)}
    vertices = np.array([nodes[tag] for tag in nodes], dtype=float)

    by_dim: dict = {1: [], 2: [], 3: []}
    for etype, phys, conn, lineno in elements:
        d = _GMSH_TYPE_DIM[etype]
        if d == 0:
            continue
        try:
            idx = [node_index[t] for t in conn]
        except KeyError:
            raise MeshError(f"line {lineno}: dangling vertex reference")
        by_dim[d].append((phys, idx))

    if by_dim[3]:
        dim = 3
    elif by_dim[2]:
        dim = 2
    else:
        raise MeshError("no volume or surface elements in file")

    cells = np.array([c for _, c in by_dim[dim]], dtype=np.int64)
    regions = np.array([p for p, _ in by_dim[dim]], dtype=np.int64)
    facets = np.array([c for _, c in by_dim[dim - 1]], dtype=np.int64)
    tags = [p for p, _ in by_dim[dim - 1]]
    if facets.size == 0:
        facets = facets.reshape(0, dim)

    if dim == 3:
        vertices3 = vertices
    else:
        if np.any(np.abs(vertices[:, 2]) > 1e-12):
            raise MeshError("2D mesh with nonzero z coordinates")
        vertices3 = vertices[:, :2]

    mesh = Mesh(dim, vertices3, cells, facets, tags, regions)
    validate_mesh(mesh)
    return mesh


def _parse_msh2(rd: _LineReader):
    nodes: dict = {}
    elements = []
    while rd.i < len(rd.lines):
        try:
            section = rd.next()
        except MeshError:
            break
        if section == "$EndMeshFormat":
            continue
        if section == "$Nodes":
            count = int(rd.next())
            for _ in range(count):
                parts = rd.next().split()
                nodes[int(parts[0])] = [float(v) for v in parts[1:4]]
            if rd.next() != "$EndNodes":
                raise rd.error("expected $EndNodes")
        elif section == "$Elements":
            count = int(rd.next())
            for _ in range(count):
                parts = rd.next().split()
                etype = int(parts[1])
                if etype not in _GMSH_TYPE_NODES:
                    raise rd.error(f"unsupported element type {etype}")
                ntags = int(parts[2])
                phys = int(parts[3]) if ntags >= 1 else 0
                conn = [int(v) for v in parts[3 + ntags:]]
                if len(conn) != _GMSH_TYPE_NODES[etype]:
                    raise rd.error("wrong node count for element")
                elements.append((etype, phys, conn, rd.i))
            if rd.next() != "$EndElements":
                raise rd.error("expected $EndElements")
        elif section.startswith("$"):
            _skip_section(rd, section)
    return nodes, elements


def _parse_msh41(rd: _LineReader):
    nodes: dict = {}
    elements = []
    entity_phys = {}   # (dim, entity tag) -> physical id
    while rd.i < len(rd.lines):
        try:
            section = rd.next()
        except MeshError:
            break
        if section == "$EndMeshFormat":
            continue
        if section == "$Entities":
            npt, ncv, nsf, nvl = (int(v) for v in rd.next().split())
            for d, cnt in ((0, npt), (1, ncv), (2, nsf), (3, nvl)):
                for _ in range(cnt):
                    parts = rd.next().split()
                    tag = int(parts[0])
                    # points: tag x y z nphys [phys...]; others: tag bbox(6) nphys [phys...] ...
                    off = 4 if d == 0 else 7
                    nphys = int(parts[off])
                    phys = int(parts[off + 1]) if nphys >= 1 else 0
                    entity_phys[(d, tag)] = phys
            if rd.next() != "$EndEntities":
                raise rd.error("expected $EndEntities")
        elif section == "$Nodes":
            nblocks, _, _, _ = (int(v) for v in rd.next().split())
            for _ in range(nblocks):
                _, _, parametric, nb = (int(v) for v in rd.next().split())
                if parametric:
                    raise rd.error("parametric nodes are not supported")
                tags = [int(rd.next()) for _ in range(nb)]
                for t in tags:
                    parts = rd.next().split()
                    nodes[t] = [float(v) for v in parts[:3]]
            if rd.next() != "$EndNodes":
                raise rd.error("expected $EndNodes")
        elif section == "$Elements":
            nblocks, _, _, _ = (int(v) for v in rd.next().split())
            for _ in range(nblocks):
                edim, etag, etype, nb = (int(v) for v in rd.next().split())
                if etype not in _GMSH_TYPE_NODES:
                    raise rd.error(f"unsupported element type {etype}")
                phys = entity_phys.get((edim, etag), 0)
                for _ in range(nb):
                    parts = [int(v) for v in rd.next().split()]
                    conn = parts[1:]
                    if len(conn) != _GMSH_TYPE_NODES[etype]:
                        raise rd.error("wrong node count for element")
                    elements.append((etype, phys, conn, rd.i))
            if rd.next() != "$EndElements":
                raise rd.error("expected $EndElements")
        elif section.startswith("$"):
            _skip_section(rd, section)
    return nodes, elements


def _skip_section(rd: _LineReader, section: str) -> None:
    end = "$End" + section[1:]
    while True:
        if rd.next() == end:
            return
