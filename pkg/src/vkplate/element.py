"""Morley-type virtual element on a single polygon.

Local dofs of a cell with ``nv`` vertices, in order:

* ``0 .. nv-1``     point values at the ring vertices
* ``nv .. 2nv-1``   normal-derivative moments along each local edge, taken
                    with the outward normal of the cell (the dof map applies
                    the sign relating it to the global edge normal)

Polynomials are expanded in the scaled monomials
``1, xi, eta, xi^2, xi*eta, eta^2`` with ``xi = (x - x_K) / h_K`` and
``eta = (y - y_K) / h_K``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .mesh import polygon_centroid, polygon_diameter
from .quadrature import edge_rule, map_rule, signed_area, triangle_rule, triangulate_polygon

LOAD_DEGREE = 10
EDGE_POINTS = 5
# Hessians of xi^2, xi*eta, eta^2 in units of 1/h^2
_HESS_UNIT = np.array([[[2.0, 0.0], [0.0, 0.0]],
                       [[0.0, 1.0], [1.0, 0.0]],
                       [[0.0, 0.0], [0.0, 2.0]]])


class ElementError(ValueError):
    pass


def scaled_monomials(points, centroid, h):
    """Values of the 6 scaled monomials at points (..., 2) -> (..., 6).

    `h` broadcasts against points[..., 0].
    """
    h = np.asarray(h, dtype=float)
    p = (np.asarray(points, dtype=float) - centroid) / h[..., None]
    xi, eta = p[..., 0], p[..., 1]
    one = np.ones_like(xi)
    return np.stack([one, xi, eta, xi * xi, xi * eta, eta * eta], axis=-1)


def monomial_gradients(points, centroid, h):
    """Physical gradients of the scaled monomials, shape (..., 6, 2)."""
    h = np.asarray(h, dtype=float)
    p = (np.asarray(points, dtype=float) - centroid) / h[..., None]
    xi, eta = p[..., 0], p[..., 1]
    z = np.zeros_like(xi)
    o = np.ones_like(xi)
    gx = np.stack([z, o, z, 2 * xi, eta, z], axis=-1)
    gy = np.stack([z, z, o, z, xi, 2 * eta], axis=-1)
    return np.stack([gx, gy], axis=-1) / h[..., None, None]


def monomial_hessians(h):
    """Constant physical Hessians of the scaled monomials, shape (6, 2, 2)."""
    H = np.zeros((6, 2, 2))
    H[3:] = _HESS_UNIT / h ** 2
    return H


def cofactor(H):
    """Cofactor of symmetric 2x2 matrices (..., 2, 2)."""
    C = np.empty_like(H)
    C[..., 0, 0] = H[..., 1, 1]
    C[..., 1, 1] = H[..., 0, 0]
    C[..., 0, 1] = -H[..., 1, 0]
    C[..., 1, 0] = -H[..., 0, 1]
    return C


@dataclass(frozen=True)
class LocalGeometry:
    coords: np.ndarray      # (nv, 2) CCW
    centroid: np.ndarray
    diameter: float
    area: float
    lengths: np.ndarray     # (nv,) local edge k joins vertex k -> k+1
    tangents: np.ndarray    # (nv, 2) unit
    normals: np.ndarray     # (nv, 2) unit outward
    triangles: np.ndarray   # ear-clipping sub-triangulation

    @property
    def nv(self):
        return len(self.coords)

    @property
    def ndof(self):
        return 2 * len(self.coords)


def local_geometry(coords):
    coords = np.asarray(coords, dtype=float)
    area = signed_area(coords)
    if not area > 0:
        raise ElementError("cell must be counterclockwise with positive area")
    t = np.roll(coords, -1, axis=0) - coords
    L = np.hypot(t[:, 0], t[:, 1])
    tan = t / L[:, None]
    nrm = np.column_stack([tan[:, 1], -tan[:, 0]])
    return LocalGeometry(coords, polygon_centroid(coords), polygon_diameter(coords),
                         area, L, tan, nrm, triangulate_polygon(coords))


def dof_matrix(geo):
    """D[i, j] = i-th dof of the j-th scaled monomial."""
    nv = geo.nv
    D = np.empty((2 * nv, 6))
    D[:nv] = scaled_monomials(geo.coords, geo.centroid, geo.diameter)
    mid = 0.5 * (geo.coords + np.roll(geo.coords, -1, axis=0))
    # gradients are affine, so the midpoint rule is exact on each edge
    grads = monomial_gradients(mid, geo.centroid, geo.diameter)
    D[nv:] = geo.lengths[:, None] * np.einsum("kjd,kd->kj", grads, geo.normals)
    return D


def boundary_gradient_matrix(geo):
    """(2, ndof) map from dofs to the boundary integral of the gradient.

    On each edge the gradient splits into its normal part (the edge dof) and
    its tangential part, whose integral is the difference of the end values.
    """
    nv = geo.nv
    Gb = np.zeros((2, 2 * nv))
    Gb[:, nv:] = geo.normals.T
    for k in range(nv):
        Gb[:, k] -= geo.tangents[k]
        Gb[:, (k + 1) % nv] += geo.tangents[k]
    return Gb


def hessian_moment_matrix(geo):
    """(2, 2, ndof) map from dofs to the integral of the Hessian over the cell."""
    nv = geo.nv
    Mc = np.zeros((2, 2, 2 * nv))
    nn = np.einsum("ki,kj->ijk", geo.normals, geo.normals)
    tn = np.einsum("ki,kj->ijk", geo.tangents, geo.normals)
    Mc[:, :, nv:] = nn
    for k in range(nv):
        Mc[:, :, k] -= tn[:, :, k]
        Mc[:, :, (k + 1) % nv] += tn[:, :, k]
    return Mc


def hessian_moment(geo, dofs):
    """Integral over the cell of the Hessian of the function with these dofs."""
    return hessian_moment_matrix(geo) @ np.asarray(dofs, dtype=float)


@dataclass(frozen=True)
class ProjectorMatrices:
    D: np.ndarray         # (ndof, 6)
    B: np.ndarray         # (6, ndof) right-hand sides of the projector system
    G: np.ndarray         # (6, 6) energy Gram matrix of the monomials
    Pi_star: np.ndarray   # (6, ndof) dofs -> monomial coefficients
    Pi_dof: np.ndarray    # (ndof, ndof) = D @ Pi_star


def build_projector(geo, cell=-1):
    nv = geo.nv
    h = geo.diameter
    D = dof_matrix(geo)
    B = np.zeros((6, 2 * nv))
    B[0, :nv] = 1.0 / nv
    B[1:3] = boundary_gradient_matrix(geo)
    Mc = hessian_moment_matrix(geo)
    B[3:] = np.einsum("qij,ijd->qd", _HESS_UNIT / h ** 2, Mc)

    G = np.zeros((6, 6))
    H = monomial_hessians(h)
    G[:, :] = geo.area * np.einsum("aij,bij->ab", H, H)

    Gt = B @ D
    lu, piv = scipy.linalg.lu_factor(Gt, check_finite=True)
    if np.abs(np.diag(lu)).min() <= 1e-12 * np.abs(Gt).max():
        raise ElementError(f"cell {cell}: singular projector system (degenerate geometry)")
    Pi_star = scipy.linalg.lu_solve((lu, piv), B)
    return ProjectorMatrices(D, B, G, Pi_star, D @ Pi_star)


@dataclass(frozen=True)
class LocalStiffness:
    consistency: np.ndarray
    stabilization: np.ndarray

    @property
    def A(self):
        return self.consistency + self.stabilization


def local_stiffness(geo, proj):
    """Projected energy plus the dof-based stabilization with h_i = h_K."""
    cons = proj.Pi_star.T @ proj.G @ proj.Pi_star
    R = np.eye(geo.ndof) - proj.Pi_dof
    stab = (R.T @ R) / geo.diameter ** 2
    cons = 0.5 * (cons + cons.T)
    stab = 0.5 * (stab + stab.T)
    return LocalStiffness(cons, stab)


def trilinear_tensor(geo):
    """W[i, j, k] = integral of cof(D^2 m_i) grad m_j . grad m_k over the cell."""
    pts, w = map_rule(geo.coords[geo.triangles], triangle_rule(2))
    pts, w = pts.reshape(-1, 2), w.ravel()
    grads = monomial_gradients(pts, geo.centroid, geo.diameter)   # (q, 6, 2)
    C = cofactor(monomial_hessians(geo.diameter))                  # (6, 2, 2)
    return np.einsum("q,iab,qjb,qka->ijk", w, C, grads, grads)


def local_trilinear(W, p, q, r):
    """(1/2) integral of cof(D^2 p) grad q . grad r for quadratics given by coefficients."""
    return 0.5 * np.einsum("ijk,i,j,k->", W, p, q, r)


def cell_average(geo, f, degree=LOAD_DEGREE):
    pts, w = map_rule(geo.coords[geo.triangles], triangle_rule(degree))
    pts, w = pts.reshape(-1, 2), w.ravel()
    return float(np.dot(w, f(pts[:, 0], pts[:, 1]))) / geo.area


def local_load(geo, f):
    """Cell contribution of (P0 f, vertex average of phi); only vertex entries are nonzero."""
    b = np.zeros(geo.ndof)
    b[:geo.nv] = cell_average(geo, f) * geo.area / geo.nv
    return b


def interpolate(geo, f, grad, signs=None):
    """Local dofs of a smooth function; `signs` flips edge orientation per edge."""
    nv = geo.nv
    d = np.empty(2 * nv)
    d[:nv] = f(geo.coords[:, 0], geo.coords[:, 1])
    for k in range(nv):
        pts, w = edge_rule(geo.coords[k], geo.coords[(k + 1) % nv], EDGE_POINTS)
        gx, gy = grad(pts[:, 0], pts[:, 1])
        d[nv + k] = np.dot(w, gx * geo.normals[k, 0] + gy * geo.normals[k, 1])
    if signs is not None:
        d[nv:] *= signs
    return d


@dataclass(frozen=True)
class LocalElement:
    cell: int
    geometry: LocalGeometry
    projector: ProjectorMatrices
    stiffness: LocalStiffness
    trilinear: np.ndarray = field(repr=False)


def build_element(coords, cell=-1):
    geo = local_geometry(coords)
    proj = build_projector(geo, cell)
    return LocalElement(cell, geo, proj, local_stiffness(geo, proj), trilinear_tensor(geo))
