"""Triangulations of polygonal domains and their barycentric dual meshes.

The solver works with two nested partitions of the domain: a conforming
triangulation (the primal mesh) and the collection of control volumes
obtained by joining edge midpoints to triangle barycenters (the dual
mesh).  Joining a barycenter to the three edge midpoints cuts a triangle
into three quadrilaterals of equal area, so every triangle donates
exactly one third of its area to the control volume of each of its
vertices.  The lumped mass matrix and the flux assembly both rely on
that property.

Conventions:
  * triangles are stored counterclockwise and must have positive area,
  * control volumes of boundary nodes are built (their areas show up in
    diagnostics) but carry no degrees of freedom; Dirichlet values are
    eliminated from all systems,
  * every dual segment runs from an edge midpoint to a barycenter and is
    recorded twice, once per adjacent control volume, with the outward
    normal of the owning volume.
"""

import numpy as np

_DEGENERATE_REL = 1e-14


class MeshError(ValueError):
    """Invalid mesh data (degenerate triangle, bad indices, ...)."""


class MeshFileError(ValueError):
    """Malformed mesh file; the message names the offending line."""


class PrimalMesh:
    """Conforming triangulation of a polygonal domain.

    Attributes
    ----------
    nodes : (N, 2) float array of vertex coordinates.
    triangles : (T, 3) int array of vertex indices, counterclockwise.
    boundary_flags : (N,) bool array, True for nodes on the boundary.
    areas : (T,) triangle areas.
    h : float, largest triangle diameter.
    cell_size : grid spacing for meshes built by
        :func:`build_uniform_triangulation`, None for general meshes.
    """

    def __init__(self, nodes, triangles, boundary_flags, cell_size=None):
        nodes = np.ascontiguousarray(nodes, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        boundary_flags = np.ascontiguousarray(boundary_flags, dtype=bool)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise MeshError("nodes must be an (N, 2) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be a (T, 3) array")
        if boundary_flags.shape != (nodes.shape[0],):
            raise MeshError("boundary_flags must have one entry per node")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(nodes)):
            raise MeshError("triangle vertex index out of range")

        p0, p1, p2 = (nodes[triangles[:, l]] for l in range(3))
        d1 = p1 - p0
        d2 = p2 - p0
        areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        scale = max(np.abs(nodes).max(initial=0.0), 1.0) ** 2
        bad = np.flatnonzero(areas <= _DEGENERATE_REL * scale)
        if bad.size:
            k = int(bad[0])
            raise MeshError(
                f"triangle {k} with vertices {triangles[k].tolist()} is degenerate "
                f"or not counterclockwise (signed area {areas[k]:.3e})"
            )

        edges = np.stack(
            [
                np.linalg.norm(p1 - p0, axis=1),
                np.linalg.norm(p2 - p1, axis=1),
                np.linalg.norm(p0 - p2, axis=1),
            ],
            axis=1,
        )

        self.nodes = nodes
        self.triangles = triangles
        self.boundary_flags = boundary_flags
        self.areas = areas
        self.diameters = edges.max(axis=1)
        self.h = float(self.diameters.max(initial=0.0))
        self.cell_size = cell_size
        self.interior_nodes = np.flatnonzero(~boundary_flags)
        for arr in (self.nodes, self.triangles, self.boundary_flags,
                    self.areas, self.diameters, self.interior_nodes):
            arr.setflags(write=False)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def n_interior(self):
        return self.interior_nodes.shape[0]

    @property
    def total_area(self):
        return float(self.areas.sum())


def build_uniform_triangulation(n, domain=(0.0, 0.0, 1.0, 1.0)):
    """Uniform triangulation of an axis-aligned rectangle.

    The rectangle is divided into an n-by-n grid of cells and each cell
    is split by its lower-left to upper-right diagonal.  Node (i, j)
    receives index j*(n+1) + i.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"subdivision count must be a positive integer, got {n!r}")
    x0, y0, x1, y1 = map(float, domain)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("domain must be a nonempty rectangle (x0, y0, x1, y1)")

    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    ii, jj = np.meshgrid(np.arange(n), np.arange(n))
    ll = (jj * (n + 1) + ii).ravel()
    lr = ll + 1
    ul = ll + n + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    gi, gj = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    boundary = ((gi == 0) | (gi == n) | (gj == 0) | (gj == n)).ravel()

    cell = min((x1 - x0) / n, (y1 - y0) / n)
    return PrimalMesh(nodes, triangles, boundary, cell_size=cell)


def read_mesh_file(path):
    """Read a mesh from the plain text format.

    Layout: a ``nodes <count>`` line followed by one ``x y`` line per
    node, a ``triangles <count>`` line followed by one ``i j k`` line
    per triangle (0-based), then a ``boundary`` line followed by the
    boundary node indices (whitespace separated, any number per line).
    """
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()

    def fail(lineno, message):
        raise MeshFileError(f"{path}:{lineno}: {message}")

    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            fail(len(lines), "unexpected end of file")
        pos += 1
        return pos, lines[pos - 1].split()

    lineno, tokens = next_line()
    if len(tokens) != 2 or tokens[0] != "nodes":
        fail(lineno, "expected 'nodes <count>'")
    try:
        n_nodes = int(tokens[1])
    except ValueError:
        fail(lineno, f"bad node count {tokens[1]!r}")
    if n_nodes < 1:
        fail(lineno, "node count must be positive")

    nodes = np.empty((n_nodes, 2))
    for row in range(n_nodes):
        lineno, tokens = next_line()
        if len(tokens) != 2:
            fail(lineno, f"expected 'x y', got {len(tokens)} fields")
        try:
            nodes[row] = [float(tokens[0]), float(tokens[1])]
        except ValueError:
            fail(lineno, f"bad coordinate in {tokens!r}")

    lineno, tokens = next_line()
    if len(tokens) != 2 or tokens[0] != "triangles":
        fail(lineno, "expected 'triangles <count>'")
    try:
        n_tri = int(tokens[1])
    except ValueError:
        fail(lineno, f"bad triangle count {tokens[1]!r}")
    if n_tri < 1:
        fail(lineno, "triangle count must be positive")

    triangles = np.empty((n_tri, 3), dtype=np.int64)
    for row in range(n_tri):
        lineno, tokens = next_line()
        if len(tokens) != 3:
            fail(lineno, f"expected 'i j k', got {len(tokens)} fields")
        try:
            triangles[row] = [int(tok) for tok in tokens]
        except ValueError:
            fail(lineno, f"bad vertex index in {tokens!r}")
        if triangles[row].min() < 0 or triangles[row].max() >= n_nodes:
            fail(lineno, f"vertex index out of range in {tokens!r}")

    lineno, tokens = next_line()
    if tokens != ["boundary"]:
        fail(lineno, "expected 'boundary'")

    flags = np.zeros(n_nodes, dtype=bool)
    while pos < len(lines):
        pos += 1
        tokens = lines[pos - 1].split()
        for tok in tokens:
            try:
                idx = int(tok)
            except ValueError:
                fail(pos, f"bad boundary node index {tok!r}")
            if idx < 0 or idx >= n_nodes:
                fail(pos, f"boundary node index {idx} out of range")
            flags[idx] = True

    try:
        return PrimalMesh(nodes, triangles, flags)
    except MeshError as exc:
        raise MeshFileError(f"{path}: {exc}") from exc


def write_mesh_file(path, mesh):
    """Write a mesh in the format understood by :func:`read_mesh_file`."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"nodes {mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            handle.write(f"{float(x)!r} {float(y)!r}\n")
        handle.write(f"triangles {mesh.n_triangles}\n")
        for i, j, k in mesh.triangles:
            handle.write(f"{i} {j} {k}\n")
        handle.write("boundary\n")
        flagged = np.flatnonzero(mesh.boundary_flags)
        for i in flagged:
            handle.write(f"{i}\n")


class ControlVolumeSegment:
    """One piece of a control volume boundary inside a single triangle.

    ``endpoints`` holds the edge midpoint first and the barycenter
    second; ``outward_normal`` is the unit normal pointing out of the
    control volume of ``owner_node``.
    """

    __slots__ = ("owner_node", "triangle", "endpoints", "outward_normal", "length")

    def __init__(self, owner_node, triangle, endpoints, outward_normal, length):
        self.owner_node = int(owner_node)
        self.triangle = int(triangle)
        self.endpoints = np.asarray(endpoints, dtype=float)
        self.outward_normal = np.asarray(outward_normal, dtype=float)
        self.length = float(length)

    def __repr__(self):
        return (
            f"ControlVolumeSegment(owner={self.owner_node}, triangle={self.triangle}, "
            f"length={self.length:.3e})"
        )


class DualMesh:
    """Barycentric dual of a primal triangulation.

    Segment data is stored in flat arrays (two owners per geometric
    midpoint-to-barycenter piece, so 6 per triangle); use
    :meth:`segment` or :meth:`node_segments` for record views.
    """

    def __init__(self, mesh, control_volume_areas, vertex_shares,
                 seg_owner, seg_triangle, seg_start, seg_end, seg_normal, seg_length):
        self.mesh = mesh
        self.control_volume_areas = control_volume_areas
        self.vertex_shares = vertex_shares
        self.seg_owner = seg_owner
        self.seg_triangle = seg_triangle
        self.seg_start = seg_start
        self.seg_end = seg_end
        self.seg_normal = seg_normal
        self.seg_length = seg_length
        for arr in (control_volume_areas, vertex_shares, seg_owner, seg_triangle,
                    seg_start, seg_end, seg_normal, seg_length):
            arr.setflags(write=False)

    @property
    def n_segments(self):
        return self.seg_owner.shape[0]

    def segment(self, index):
        return ControlVolumeSegment(
            self.seg_owner[index],
            self.seg_triangle[index],
            np.stack([self.seg_start[index], self.seg_end[index]]),
            self.seg_normal[index],
            self.seg_length[index],
        )

    def node_segments(self, node):
        """All boundary segments of the control volume around ``node``."""
        return [self.segment(i) for i in np.flatnonzero(self.seg_owner == node)]


def build_dual_mesh(mesh):
    """Build the barycentric dual mesh of a triangulation.

    Every triangle contributes three quadrilateral shares (vertex, two
    adjacent edge midpoints, barycenter) and six owner-tagged boundary
    segments.  Share areas are computed by the shoelace formula rather
    than as areas/3 so that the equal-split property stays a checkable
    statement about the geometry.
    """
    tri = mesh.triangles
    pts = mesh.nodes[tri]                       # (T, 3, 2)
    scale = max(np.abs(mesh.nodes).max(initial=0.0), 1.0) ** 2
    if np.any(mesh.areas <= _DEGENERATE_REL * scale):
        k = int(np.argmin(mesh.areas))
        raise MeshError(f"triangle {k} is degenerate (area {mesh.areas[k]:.3e})")

    centers = pts.mean(axis=1)                  # (T, 2)
    mids = 0.5 * (pts + np.roll(pts, -1, axis=1))   # mids[:, l] = midpoint(P_l, P_{l+1})

    vertex_shares = np.empty((mesh.n_triangles, 3))
    for l in range(3):
        quad = np.stack(
            [pts[:, l], mids[:, l], centers, mids[:, (l + 2) % 3]], axis=1
        )                                        # (T, 4, 2), counterclockwise
        rolled = np.roll(quad, -1, axis=1)
        vertex_shares[:, l] = 0.5 * np.sum(
            quad[:, :, 0] * rolled[:, :, 1] - rolled[:, :, 0] * quad[:, :, 1], axis=1
        )
    if np.any(vertex_shares <= 0.0):
        t_bad, _ = np.unravel_index(np.argmin(vertex_shares), vertex_shares.shape)
        raise MeshError(f"triangle {int(t_bad)} produced a non-positive dual share")

    areas = np.zeros(mesh.n_nodes)
    for l in range(3):
        np.add.at(areas, tri[:, l], vertex_shares[:, l])

    n_tri = mesh.n_triangles
    owner_blocks = []
    tri_index = np.arange(n_tri, dtype=np.int64)
    starts, normals, lengths = [], [], []
    for l in range(3):
        a = tri[:, l]
        b = tri[:, (l + 1) % 3]
        mid = mids[:, l]
        tangent = centers - mid
        length = np.linalg.norm(tangent, axis=1)
        perp = np.column_stack([-tangent[:, 1], tangent[:, 0]])
        # Orient toward the neighbor across the segment, then normalize.
        toward_b = mesh.nodes[b] - mesh.nodes[a]
        sign = np.sign(np.einsum("ij,ij->i", perp, toward_b))
        if np.any(sign == 0.0):
            raise MeshError("dual segment degenerated to a point")
        unit = perp * (sign / length)[:, None]
        for owner, n_vec in ((a, unit), (b, -unit)):
            owner_blocks.append(owner)
            starts.append(mid)
            normals.append(n_vec)
            lengths.append(length)

    seg_owner = np.concatenate(owner_blocks)
    seg_triangle = np.tile(tri_index, 6)
    seg_start = np.concatenate(starts)
    seg_end = np.tile(centers, (6, 1))
    seg_normal = np.concatenate(normals)
    seg_length = np.concatenate(lengths)

    return DualMesh(mesh, areas, vertex_shares, seg_owner, seg_triangle,
                    seg_start, seg_end, seg_normal, seg_length)


class QuasiUniformityReport:
    """Min/max shape statistics of a mesh and its dual."""

    def __init__(self, h, interior_volume_min, interior_volume_max,
                 interior_ratio_min, interior_ratio_max,
                 triangle_area_min, triangle_area_max,
                 triangle_ratio_min, triangle_ratio_max):
        self.h = h
        self.interior_volume_min = interior_volume_min
        self.interior_volume_max = interior_volume_max
        self.interior_ratio_min = interior_ratio_min
        self.interior_ratio_max = interior_ratio_max
        self.triangle_area_min = triangle_area_min
        self.triangle_area_max = triangle_area_max
        self.triangle_ratio_min = triangle_ratio_min
        self.triangle_ratio_max = triangle_ratio_max


def quasi_uniformity_report(mesh, dual):
    """Shape statistics: control volume and triangle areas against h^2.

    Meshes without interior nodes yield None for the interior fields.
    """
    h2 = mesh.h ** 2
    tri_min = float(mesh.areas.min())
    tri_max = float(mesh.areas.max())
    if mesh.n_interior:
        vols = dual.control_volume_areas[mesh.interior_nodes]
        v_min, v_max = float(vols.min()), float(vols.max())
        return QuasiUniformityReport(mesh.h, v_min, v_max, v_min / h2, v_max / h2,
                                     tri_min, tri_max, tri_min / h2, tri_max / h2)
    return QuasiUniformityReport(mesh.h, None, None, None, None,
                                 tri_min, tri_max, tri_min / h2, tri_max / h2)
