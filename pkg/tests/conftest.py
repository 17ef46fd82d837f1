import math

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from vkplate.assembly import BOUNDARY

# reflex dart: notch at (3/4, 1/2) cut into the right half of the unit square
DART = np.array([[0.5, 0.0], [1.0, 0.0], [1.0, 1.0], [0.5, 1.0], [0.75, 0.5]])
DART_TRIANGLES = [DART[[0, 1, 4]], DART[[1, 2, 4]], DART[[2, 3, 4]]]
UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_polygon(rng, nv=None, center=(0.0, 0.0), scale=1.0):
    """Random simple CCW polygon, star-shaped about `center`, possibly nonconvex."""
    if nv is None:
        nv = int(rng.integers(3, 9))
    gaps = rng.uniform(0.3, 1.0, nv)
    theta = np.cumsum(gaps) / gaps.sum() * 2 * math.pi + rng.uniform(0, 2 * math.pi)
    r = scale * rng.uniform(0.4, 1.0, nv)
    return np.column_stack([center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)])


def green_moment(ring, a, b):
    """Exact integral of x^a y^b over a polygon by the divergence theorem.

    Uses int x^a y^b dA = oint x^(a+1) y^b / (a+1) dy with Gauss-Legendre on
    each edge (polynomial integrand, so the edge rule is exact).
    """
    t, w = leggauss(a + b + 2)
    t = 0.5 * (t + 1)
    w = 0.5 * w
    tot = 0.0
    for k in range(len(ring)):
        p, q = ring[k], ring[(k + 1) % len(ring)]
        x = p[0] + t * (q[0] - p[0])
        y = p[1] + t * (q[1] - p[1])
        tot += np.dot(w, x ** (a + 1) * y ** b) / (a + 1) * (q[1] - p[1])
    return tot


# ---------------------------------------------------------------- Morley oracle
# Classical Morley element in plain x, y monomials {1, x, y, x^2, xy, y^2}.

_HESS = np.zeros((6, 2, 2))
_HESS[3] = [[2, 0], [0, 0]]
_HESS[4] = [[0, 1], [1, 0]]
_HESS[5] = [[0, 0], [0, 2]]


def plain_monomials(x, y):
    return np.array([np.ones_like(x), x, y, x * x, x * y, y * y])


def plain_gradients(x, y):
    z, o = np.zeros_like(x), np.ones_like(x)
    return np.array([[z, z], [o, z], [z, o], [2 * x, z], [y, x], [z, 2 * y]])


def morley_dofs(tri, normals):
    """Dof matrix D[i, j]: vertex values then edge normal-derivative moments."""
    D = np.zeros((6, 6))
    for i in range(3):
        D[i] = plain_monomials(*tri[i])
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        L = np.hypot(*(b - a))
        m = 0.5 * (a + b)
        # Simpson's rule, exact for the linear integrand
        g = (plain_gradients(*a) + 4 * plain_gradients(*m) + plain_gradients(*b)) / 6
        D[3 + k] = L * (g @ normals[k])
    return D


def morley_stiffness(tri, normals):
    tri = np.asarray(tri, dtype=float)
    x, y = tri[:, 0], tri[:, 1]
    area = 0.5 * abs((x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]))
    C = np.linalg.inv(morley_dofs(tri, normals))
    G = area * np.einsum("aij,bij->ab", _HESS, _HESS)
    return C.T @ G @ C


def outward_normals(tri):
    t = np.roll(tri, -1, axis=0) - tri
    L = np.hypot(t[:, 0], t[:, 1])
    return np.column_stack([t[:, 1], -t[:, 0]]) / L[:, None]


def morley_global(mesh, dof_map):
    """Dense global Morley stiffness, assembled with the global edge normals."""
    n = dof_map.n_dof
    K = np.zeros((n, n))
    for c, ring in enumerate(mesh.cells):
        tri = mesh.vertices[ring]
        edges = mesh.cell_edges[c]
        loc = morley_stiffness(tri, mesh.edge_normals[edges])
        idx = np.concatenate([dof_map.vertex_dof[ring], dof_map.edge_dof[edges]])
        for i in range(6):
            for j in range(6):
                if idx[i] != BOUNDARY and idx[j] != BOUNDARY:
                    K[idx[i], idx[j]] += loc[i, j]
    return K
