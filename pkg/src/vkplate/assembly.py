"""Global dofs, sparse assembly of the plate operator, loads and the trilinear terms.

Global unknowns of one scalar field are the values at interior vertices
followed by the normal-derivative moments on interior edges (global edge
normal). Boundary dofs are eliminated (clamped plate). A state vector stacks
the displacement block U and the Airy stress block V.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .element import EDGE_POINTS, LOAD_DEGREE, ElementError, build_element
from .quadrature import edge_rule, map_rule, triangle_rule

BOUNDARY = -1


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class DofMap:
    n_dof: int
    n_vertex_dofs: int
    n_edge_dofs: int
    vertex_dof: np.ndarray    # (n_vertices,), BOUNDARY on the boundary
    edge_dof: np.ndarray      # (n_edges,)
    cell_dofs: tuple          # per cell: global index or BOUNDARY per local dof
    cell_signs: tuple         # per cell: +1 for vertex dofs, sigma_{K,e} for edge dofs

    def local(self, c):
        return self.cell_dofs[c], self.cell_signs[c]


def build_dof_map(mesh):
    interior_v = ~mesh.boundary_vertex
    interior_e = ~mesh.boundary_edge
    nv, ne = int(interior_v.sum()), int(interior_e.sum())
    if nv + ne == 0:
        raise AssemblyError("mesh has no interior dofs")
    vdof = np.full(mesh.n_vertices, BOUNDARY, dtype=np.int64)
    vdof[interior_v] = np.arange(nv)
    edof = np.full(mesh.n_edges, BOUNDARY, dtype=np.int64)
    edof[interior_e] = nv + np.arange(ne)
    cell_dofs, cell_signs = [], []
    for c, ring in enumerate(mesh.cells):
        d = np.concatenate([vdof[ring], edof[mesh.cell_edges[c]]])
        s = np.concatenate([np.ones(len(ring)), mesh.cell_edge_signs[c]])
        d.flags.writeable = False
        s.flags.writeable = False
        cell_dofs.append(d)
        cell_signs.append(s)
    for a in (vdof, edof):
        a.flags.writeable = False
    return DofMap(nv + ne, nv, ne, vdof, edof, tuple(cell_dofs), tuple(cell_signs))


def _build_range(mesh, cells):
    out = []
    for c in cells:
        try:
            out.append(build_element(mesh.cell_coords(c), c))
        except ElementError as exc:
            raise ElementError(f"cell {c}: {exc}") from None
    return out


def build_elements(mesh, threads=1):
    cells = np.arange(mesh.n_cells)
    if threads <= 1 or mesh.n_cells < 64:
        return _build_range(mesh, cells)
    chunks = np.array_split(cells, threads * 4)
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(lambda ch: _build_range(mesh, ch), chunks))
    return [el for part in parts for el in part]


@dataclass(frozen=True)
class ElementBatch:
    """Cells with the same vertex count, stacked for vectorized work."""
    cells: np.ndarray       # (nc,)
    dofs: np.ndarray        # (nc, N) global index, BOUNDARY clipped to 0
    scale: np.ndarray       # (nc, N) sign, 0 on boundary dofs
    Pi_star: np.ndarray     # (nc, 6, N)
    A: np.ndarray           # (nc, N, N)
    W: np.ndarray           # (nc, 6, 6, 6)

    def gather(self, x):
        """Local dof vectors (nc, N) of a global field vector."""
        return self.scale * x[self.dofs]

    def scatter_vector(self, loc, n):
        out = np.zeros(n)
        np.add.at(out, self.dofs.ravel(), (self.scale * loc).ravel())
        return out

    def scatter_matrix(self, loc):
        """COO triplets of local matrices (nc, N, N); boundary entries vanish via scale."""
        nc, N = self.dofs.shape
        vals = self.scale[:, :, None] * loc * self.scale[:, None, :]
        rows = np.broadcast_to(self.dofs[:, :, None], (nc, N, N))
        cols = np.broadcast_to(self.dofs[:, None, :], (nc, N, N))
        keep = (self.scale[:, :, None] * self.scale[:, None, :]) != 0
        return rows[keep], cols[keep], vals[keep]


class Discretization:
    """Mesh, dof map and all local element data for one mesh."""

    def __init__(self, mesh, threads=1):
        self.mesh = mesh
        self.dof_map = build_dof_map(mesh)
        self.elements = build_elements(mesh, threads)
        self.threads = threads
        sizes = np.array([len(r) for r in mesh.cells])
        batches = []
        for nv in np.unique(sizes):
            cells = np.flatnonzero(sizes == nv)
            dofs = np.array([self.dof_map.cell_dofs[c] for c in cells])
            signs = np.array([self.dof_map.cell_signs[c] for c in cells])
            scale = np.where(dofs == BOUNDARY, 0.0, signs)
            els = [self.elements[c] for c in cells]
            batches.append(ElementBatch(
                cells, np.where(dofs == BOUNDARY, 0, dofs), scale,
                np.array([e.projector.Pi_star for e in els]),
                np.array([e.stiffness.A for e in els]),
                np.array([e.trilinear for e in els])))
        self.batches = batches
        self._stiffness = None

    @property
    def n_dof(self):
        return self.dof_map.n_dof

    def stiffness(self):
        if self._stiffness is None:
            self._stiffness = assemble_stiffness(self)
        return self._stiffness

    def projected_coefficients(self, x):
        """Scaled-monomial coefficients (n_cells, 6) of the projection of a field."""
        out = np.empty((self.mesh.n_cells, 6))
        for b in self.batches:
            out[b.cells] = np.einsum("cmn,cn->cm", b.Pi_star, b.gather(x))
        return out


def _to_csr(triplets, n):
    rows = np.concatenate([t[0] for t in triplets])
    cols = np.concatenate([t[1] for t in triplets])
    vals = np.concatenate([t[2] for t in triplets])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def assemble_stiffness(disc):
    """Sparse symmetric matrix of the discrete bilinear form on one field."""
    return _to_csr([b.scatter_matrix(b.A) for b in disc.batches], disc.n_dof)


def batch_rule(disc, batch, degree):
    """Quadrature points (nc, q, 2) and weights (nc, q) on the cells of a batch."""
    els = [disc.elements[c] for c in batch.cells]
    tri = np.array([e.geometry.coords[e.geometry.triangles] for e in els])
    pts, w = map_rule(tri, triangle_rule(degree))
    nc = len(els)
    return pts.reshape(nc, -1, 2), w.reshape(nc, -1)


def assemble_field_load(disc, f, degree=LOAD_DEGREE):
    """Global load of (P0 f, vertex average of phi); same as summing `local_load` per cell."""
    n = disc.n_dof
    out = np.zeros(n)
    if f is None:
        return out
    for b in disc.batches:
        pts, w = batch_rule(disc, b, degree)
        # integral of P0 f over K, shared equally by the nv vertex dofs
        share = np.sum(w * f(pts[..., 0], pts[..., 1]), axis=1)
        nv = b.dofs.shape[1] // 2
        loc = np.zeros(b.dofs.shape)
        loc[:, :nv] = (share / nv)[:, None]
        out += b.scatter_vector(loc, n)
    return out


def assemble_load(disc, f, g=None):
    """Stacked load (U block from f, V block from g), length 2 * n_dof."""
    return np.concatenate([assemble_field_load(disc, f), assemble_field_load(disc, g)])


def _form(W, p, q):
    """Test-slot coefficients of b_h(p, q, .) per cell."""
    return 0.5 * np.einsum("cijk,ci,cj->ck", W, p, q)


def trilinear_scatter(disc, X):
    """Residual B_h(Psi, Psi, .) and its Jacobian Y -> B_h(Psi, Y, .) + B_h(Y, Psi, .).

    B_h(Xi, Theta, Phi) = b_h(xi1, theta2, phi1) + b_h(xi2, theta1, phi1)
                          - b_h(xi1, theta1, phi2)
    with b_h^K(p, q, r) = 1/2 int_K cof(D^2 Pi p) grad Pi q . grad Pi r.
    """
    n = disc.n_dof
    X = np.asarray(X, dtype=float)
    if X.shape != (2 * n,):
        raise AssemblyError(f"state vector must have length {2 * n}")
    U, V = X[:n], X[n:]
    res = np.zeros(2 * n)
    trip = []
    for b in disc.batches:
        P = b.Pi_star
        cu = np.einsum("cmn,cn->cm", P, b.gather(U))
        cv = np.einsum("cmn,cn->cm", P, b.gather(V))
        W = b.W
        r1 = _form(W, cu, cv) + _form(W, cv, cu)
        r2 = -_form(W, cu, cu)
        res[:n] += b.scatter_vector(np.einsum("cmn,cm->cn", P, r1), n)
        res[n:] += b.scatter_vector(np.einsum("cmn,cm->cn", P, r2), n)
        # K(p)[k, j]: coefficient-space matrix of q -> b(p, q, .) + b(q, p, .)
        Kv = 0.5 * (np.einsum("cijk,ci->ckj", W, cv) + np.einsum("cjik,ci->ckj", W, cv))
        Ku = 0.5 * (np.einsum("cijk,ci->ckj", W, cu) + np.einsum("cjik,ci->ckj", W, cu))
        J11 = np.einsum("cmk,cmj,cjn->ckn", P, Kv, P)
        J12 = np.einsum("cmk,cmj,cjn->ckn", P, Ku, P)
        for (ro, co, loc) in ((0, 0, J11), (0, n, J12), (n, 0, -J12)):
            r, c, v = b.scatter_matrix(loc)
            trip.append((r + ro, c + co, v))
    return res, _to_csr(trip, 2 * n)


def interpolate_field(disc, f, grad):
    """Global dofs of a smooth function vanishing with its gradient on the boundary."""
    mesh = disc.mesh
    dm = disc.dof_map
    x = np.zeros(dm.n_dof)
    iv = np.flatnonzero(dm.vertex_dof != BOUNDARY)
    x[dm.vertex_dof[iv]] = f(mesh.vertices[iv, 0], mesh.vertices[iv, 1])
    for e in np.flatnonzero(dm.edge_dof != BOUNDARY):
        a, bb = mesh.vertices[mesh.edges[e]]
        pts, w = edge_rule(a, bb, EDGE_POINTS)
        gx, gy = grad(pts[:, 0], pts[:, 1])
        nrm = mesh.edge_normals[e]
        x[dm.edge_dof[e]] = np.dot(w, gx * nrm[0] + gy * nrm[1])
    return x
