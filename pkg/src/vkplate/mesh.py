"""Polygonal meshes: data model, generators, quality checks and JSON I/O.

Supported families (``generate_mesh``):

* ``triangular``         n x n grid, each square split along its positive-slope diagonal
* ``square``             n x n grid of squares
* ``concave``            each grid square split into a convex and a nonconvex pentagon
* ``voronoi_structured`` Voronoi cells of a checkerboard-perturbed n x n seed grid
* ``voronoi_random``     Lloyd-relaxed Voronoi cells of n^2 random seeds

The L-shaped domain (-1,1)^2 minus [0,1)x(-1,0] is available for ``triangular``.
"""
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Voronoi, cKDTree

from .quadrature import is_simple, signed_area

FAMILIES = ("triangular", "square", "concave", "voronoi_structured", "voronoi_random")
DOMAINS = ("unit_square", "l_shape")
DOMAIN_AREA = {"unit_square": 1.0, "l_shape": 3.0}


class MeshError(ValueError):
    """Invalid mesh topology, geometry or generator arguments."""


class MeshFormatError(MeshError):
    """Malformed mesh file."""


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def polygon_centroid(ring):
    ring = np.asarray(ring, dtype=float)
    x, y = ring[:, 0], ring[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    c = x * yn - xn * y
    a = 0.5 * c.sum()
    return np.array([((x + xn) * c).sum(), ((y + yn) * c).sum()]) / (6.0 * a)


def polygon_diameter(ring):
    ring = np.asarray(ring, dtype=float)
    d = ring[:, None, :] - ring[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


class PolygonalMesh:
    """Conforming polygonal mesh with edge topology.

    Cells are counterclockwise vertex rings. Local edge k of a cell joins
    ring vertices k and k+1. Each edge has a fixed global unit normal; on the
    boundary it is the outward normal of the domain. ``cell_edge_signs[c][k]``
    is +1 when the outward normal of cell c along its k-th edge equals the
    global normal and -1 otherwise. Interior normals point to the right of
    the edge traversed lower -> higher vertex index unless listed in
    `flip_normals`.
    """

    def __init__(self, vertices, cells, flip_normals=()):
        vertices = np.array(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        if not np.all(np.isfinite(vertices)):
            raise MeshError("non-finite vertex coordinates")
        nv = len(vertices)
        rings = []
        for c, ring in enumerate(cells):
            ring = np.array(ring, dtype=np.int64)
            if ring.ndim != 1 or len(ring) < 3:
                raise MeshError(f"cell {c}: needs at least 3 vertices")
            if ring.min() < 0 or ring.max() >= nv:
                raise MeshError(f"cell {c}: vertex index out of range")
            if len(np.unique(ring)) != len(ring):
                raise MeshError(f"cell {c}: repeated vertex")
            rings.append(ring)
        if not rings:
            raise MeshError("mesh has no cells")

        areas = np.empty(len(rings))
        for c, ring in enumerate(rings):
            pts = vertices[ring]
            areas[c] = signed_area(pts)
            if areas[c] <= 0.0:
                raise MeshError(f"cell {c}: not counterclockwise (signed area {areas[c]:.3e})")
            if len(ring) > 3 and not is_simple(pts):
                raise MeshError(f"cell {c}: self-intersecting ring")

        edge_id = {}
        edges = []
        edge_cells = []
        cell_edges = []
        for c, ring in enumerate(rings):
            ids = np.empty(len(ring), dtype=np.int64)
            for k in range(len(ring)):
                a, b = int(ring[k]), int(ring[(k + 1) % len(ring)])
                key = (a, b) if a < b else (b, a)
                e = edge_id.get(key)
                if e is None:
                    e = edge_id[key] = len(edges)
                    edges.append(key)
                    edge_cells.append([c, -1])
                else:
                    if edge_cells[e][1] != -1:
                        raise MeshError(f"edge {key} shared by more than two cells")
                    edge_cells[e][1] = c
                ids[k] = e
            cell_edges.append(ids)
        edges = np.array(edges, dtype=np.int64)
        edge_cells = np.array(edge_cells, dtype=np.int64)

        # directed use of each edge must be opposite in its two cells
        seen = {}
        for c, ring in enumerate(rings):
            for k in range(len(ring)):
                a, b = int(ring[k]), int(ring[(k + 1) % len(ring)])
                if (a, b) in seen:
                    raise MeshError(f"cells {seen[(a, b)]} and {c} overlap along edge {(a, b)}")
                seen[(a, b)] = c

        boundary_edge = edge_cells[:, 1] < 0
        boundary_vertex = np.zeros(nv, dtype=bool)
        boundary_vertex[edges[boundary_edge].ravel()] = True

        used = np.zeros(nv, dtype=bool)
        for ring in rings:
            used[ring] = True
        if not used.all():
            raise MeshError(f"{(~used).sum()} vertices are not used by any cell")

        euler = nv - len(edges) + len(rings)
        if euler != 1:
            raise MeshError(f"Euler characteristic {euler} != 1; domain is not simply connected")

        t = vertices[edges[:, 1]] - vertices[edges[:, 0]]
        lengths = np.hypot(t[:, 0], t[:, 1])
        if np.any(lengths == 0.0):
            raise MeshError("zero-length edge")
        normals = np.column_stack([t[:, 1], -t[:, 0]]) / lengths[:, None]

        cell_edge_signs = []
        for c, ring in enumerate(rings):
            s = np.empty(len(ring))
            for k in range(len(ring)):
                a = int(ring[k])
                e = cell_edges[c][k]
                # outward normal of a CCW ring along a -> b is (dy, -dx);
                # it matches the default normal iff a is the lower endpoint
                s[k] = 1.0 if edges[e, 0] == a else -1.0
                if boundary_edge[e] and s[k] < 0:
                    normals[e] = -normals[e]
                    s[k] = 1.0
            cell_edge_signs.append(s)
        for e in flip_normals:
            if boundary_edge[e]:
                raise MeshError(f"edge {e}: boundary normals are fixed to the outward normal")
            normals[e] = -normals[e]
            for c in edge_cells[e]:
                cell_edge_signs[c][cell_edges[c] == e] *= -1.0

        self.vertices = _readonly(vertices)
        self.cells = tuple(_readonly(r) for r in rings)
        self.edges = _readonly(edges)
        self.edge_cells = _readonly(edge_cells)
        self.edge_normals = _readonly(normals)
        self.edge_lengths = _readonly(lengths)
        self.cell_edges = tuple(_readonly(e) for e in cell_edges)
        self.cell_edge_signs = tuple(_readonly(s) for s in cell_edge_signs)
        self.boundary_edge = _readonly(boundary_edge)
        self.boundary_vertex = _readonly(boundary_vertex)
        self.areas = _readonly(areas)
        self.diameters = _readonly(np.array([polygon_diameter(vertices[r]) for r in rings]))

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def h_max(self):
        return float(self.diameters.max())

    @property
    def area(self):
        return float(self.areas.sum())

    def cell_coords(self, c):
        return self.vertices[self.cells[c]]

    def __eq__(self, other):
        if not isinstance(other, PolygonalMesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and len(self.cells) == len(other.cells)
                and all(np.array_equal(a, b) for a, b in zip(self.cells, other.cells)))

    __hash__ = None

    def __repr__(self):
        return (f"PolygonalMesh(vertices={self.n_vertices}, edges={self.n_edges}, "
                f"cells={self.n_cells}, h_max={self.h_max:.6g})")


# ---------------------------------------------------------------- generators

def _grid_index(n):
    return lambda i, j: j * (n + 1) + i


def _grid_vertices(n, x0=0.0, y0=0.0, size=1.0):
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x0 + size * s, y0 + size * s)
    return np.column_stack([X.ravel(), Y.ravel()])


def _square_mesh(n):
    idx = _grid_index(n)
    cells = [[idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]
             for j in range(n) for i in range(n)]
    return _grid_vertices(n), cells


def _triangular_mesh(n):
    idx = _grid_index(n)
    cells = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            cells += [[a, b, c], [a, c, d]]
    return _grid_vertices(n), cells


def _concave_mesh(n):
    # per square: cut along bottom-midpoint -> (1/4, 1/2) -> top-midpoint
    h = 1.0 / n
    verts = list(map(tuple, _grid_vertices(n)))
    corner = _grid_index(n)
    mids = {}

    def mid(i, j):
        # midpoint of horizontal grid edge from (i, j) to (i+1, j)
        if (i, j) not in mids:
            mids[(i, j)] = len(verts)
            verts.append(((i + 0.5) * h, j * h))
        return mids[(i, j)]

    cells = []
    for j in range(n):
        for i in range(n):
            a, b = corner(i, j), corner(i + 1, j)
            c, d = corner(i + 1, j + 1), corner(i, j + 1)
            bm, tm = mid(i, j), mid(i, j + 1)
            p = len(verts)
            verts.append(((i + 0.25) * h, (j + 0.5) * h))
            cells.append([a, bm, p, tm, d])      # nonconvex
            cells.append([bm, b, c, tm, p])      # convex
    return np.array(verts), cells


def _lshape_triangular(n):
    m = 2 * n
    idx = _grid_index(m)
    pts = _grid_vertices(m, -1.0, -1.0, 2.0)
    cells = []
    for j in range(m):
        for i in range(m):
            if i >= n and j < n:
                continue
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            cells += [[a, b, c], [a, c, d]]
    return _compact(pts, cells)


def _compact(pts, cells):
    used = np.unique(np.concatenate([np.asarray(c) for c in cells]))
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return pts[used], [remap[np.asarray(c)].tolist() for c in cells]


def _voronoi_cells(seeds):
    """Voronoi cells of `seeds` clipped to the unit square by mirroring."""
    x, y = seeds[:, 0], seeds[:, 1]
    mirrored = np.vstack([seeds,
                          np.column_stack([-x, y]), np.column_stack([2.0 - x, y]),
                          np.column_stack([x, -y]), np.column_stack([x, 2.0 - y])])
    vor = Voronoi(mirrored)
    rings = []
    for i in range(len(seeds)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise MeshError("unbounded Voronoi region; seeds must lie inside the square")
        rings.append(np.asarray(region, dtype=np.int64))
    return vor.vertices, rings


def _lloyd(seeds, iters):
    for _ in range(iters):
        verts, rings = _voronoi_cells(seeds)
        seeds = np.array([polygon_centroid(_ccw(verts[r])) for r in rings])
    return seeds


def _ccw(pts):
    return pts if signed_area(pts) > 0 else pts[::-1]


def _voronoi_mesh(seeds, n):
    verts, rings = _voronoi_cells(seeds)
    tol = 1e-9 / n
    verts = verts.copy()
    for k in range(2):
        for v in (0.0, 1.0):
            verts[np.abs(verts[:, k] - v) < tol, k] = v
    used = np.unique(np.concatenate(rings))
    # merge numerically coincident Voronoi vertices (degenerate seed circles)
    parent = {int(u): int(u) for u in used}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = cKDTree(verts[used])
    for p, q in sorted(tree.query_pairs(tol)):
        ra, rb = find(int(used[p])), find(int(used[q]))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    cells = []
    for r in rings:
        ring = [find(int(v)) for v in r]
        ring = [v for k, v in enumerate(ring) if v != ring[k - 1]]
        if signed_area(verts[ring]) < 0:
            ring = ring[::-1]
        cells.append(ring)
    return _compact(verts, cells)


def _structured_seeds(n):
    c = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(c, c, indexing="xy")
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    s = np.where((I + J) % 2 == 0, 1.0, -1.0) * 0.2 / n
    return np.column_stack([(X + s).ravel(), (Y + s).ravel()])


def _normalize(name):
    return name.replace("-", "_").lower()


def generate_mesh(family, domain="unit_square", n=4, seed=None, lloyd_iters=3):
    """Generate a mesh of the given family; deterministic in all arguments."""
    family = _normalize(family)
    domain = _normalize(domain)
    if family not in FAMILIES:
        raise MeshError(f"unknown mesh family {family!r}")
    if domain not in DOMAINS:
        raise MeshError(f"unknown domain {domain!r}")
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if domain == "l_shape":
        if family != "triangular":
            raise MeshError(f"family {family!r} is not available on the L-shaped domain")
        return PolygonalMesh(*_lshape_triangular(n))
    if family == "square":
        return PolygonalMesh(*_square_mesh(n))
    if family == "triangular":
        return PolygonalMesh(*_triangular_mesh(n))
    if family == "concave":
        return PolygonalMesh(*_concave_mesh(n))
    if family == "voronoi_structured":
        if n < 2:
            raise MeshError("voronoi_structured needs n >= 2")
        return PolygonalMesh(*_voronoi_mesh(_structured_seeds(n), n))
    if n < 2:
        raise MeshError("voronoi_random needs n >= 2")
    if lloyd_iters < 0:
        raise MeshError("lloyd_iters must be >= 0")
    rng = np.random.default_rng(0 if seed is None else seed)
    seeds = rng.uniform(0.0, 1.0, size=(n * n, 2))
    seeds = _lloyd(seeds, lloyd_iters)
    return PolygonalMesh(*_voronoi_mesh(seeds, n))


# ------------------------------------------------------------------ quality

@dataclass(frozen=True)
class MeshQualityReport:
    min_edge_to_diameter_ratio: float
    min_kernel_radius_to_diameter: float
    worst_cell_id: int


def kernel_radius(ring):
    """Radius of the largest disc inside the kernel of a polygon.

    The kernel is the intersection of the inward half-planes of the edges;
    an empty kernel gives 0.
    """
    ring = np.asarray(ring, dtype=float)
    q = np.roll(ring, -1, axis=0)
    t = q - ring
    L = np.hypot(t[:, 0], t[:, 1])
    nrm = np.column_stack([t[:, 1], -t[:, 0]]) / L[:, None]
    b = np.einsum("ij,ij->i", nrm, ring)
    A = np.column_stack([nrm, np.ones(len(ring))])
    res = linprog([0.0, 0.0, -1.0], A_ub=A, b_ub=b,
                  bounds=[(None, None), (None, None), (0.0, None)], method="highs")
    if res.status != 0:
        return 0.0
    return float(max(res.x[2], 0.0))


def validate(mesh):
    """Shape-regularity constants of the mesh (read-only)."""
    worst_ratio, worst_kernel, worst = math.inf, math.inf, -1
    for c in range(mesh.n_cells):
        pts = mesh.cell_coords(c)
        if len(pts) > 3 and not is_simple(pts):
            raise MeshError(f"cell {c}: self-intersecting ring")
        h = mesh.diameters[c]
        ratio = mesh.edge_lengths[mesh.cell_edges[c]].min() / h
        kr = kernel_radius(pts) / h
        worst_ratio = min(worst_ratio, ratio)
        if kr < worst_kernel:
            worst_kernel, worst = kr, c
    return MeshQualityReport(float(worst_ratio), float(worst_kernel), worst)


# ---------------------------------------------------------------------- I/O

def mesh_to_json(mesh):
    lines = ['{"vertices": [']
    vs = [f"  [{json.dumps(float(x))}, {json.dumps(float(y))}]" for x, y in mesh.vertices]
    lines.append(",\n".join(vs))
    lines.append('],\n"cells": [')
    cs = ["  [" + ", ".join(str(int(i)) for i in c) + "]" for c in mesh.cells]
    lines.append(",\n".join(cs))
    lines.append("]}\n")
    return "\n".join(lines)


def save_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(mesh_to_json(mesh))


def mesh_from_json(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict) or "vertices" not in data or "cells" not in data:
        raise MeshFormatError('expected an object with "vertices" and "cells"')
    verts = data["vertices"]
    if not isinstance(verts, list):
        raise MeshFormatError('"vertices" must be a list')
    for k, v in enumerate(verts):
        if (not isinstance(v, list) or len(v) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
            raise MeshFormatError(f"vertices[{k}]: expected [x, y]")
    cells = data["cells"]
    if not isinstance(cells, list):
        raise MeshFormatError('"cells" must be a list')
    for c, ring in enumerate(cells):
        if not isinstance(ring, list):
            raise MeshFormatError(f"cells[{c}]: expected a list of vertex indices")
        for k, i in enumerate(ring):
            if not isinstance(i, int) or isinstance(i, bool):
                raise MeshFormatError(f"cells[{c}][{k}]: expected an integer")
            if not 0 <= i < len(verts):
                raise MeshFormatError(f"cells[{c}][{k}]: vertex {i} does not exist")
    return PolygonalMesh(np.array(verts, dtype=float).reshape(-1, 2), cells)


def load_mesh(path):
    with open(path) as fh:
        return mesh_from_json(fh.read())
