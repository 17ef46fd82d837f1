"""A single Morley-type virtual element on a non-convex pentagon.

Builds the local projector and stiffness, checks that quadratics are
reproduced exactly and that the stiffness only ignores affine functions.
"""
import numpy as np

from vkplate.element import build_element, interpolate, scaled_monomials

# unit square with a notch pushed in from the right side
dart = np.array([[0, 0], [1, 0], [0.75, 0.5], [1, 1], [0, 1]], dtype=float)
el = build_element(dart)
geo, P = el.geometry, el.projector
print(f"local dofs: {geo.ndof} (5 vertex values, 5 edge normal moments)")
print(f"diameter {geo.diameter:.4f}, centroid {geo.centroid}")


def f(x, y):
    return 1 + x - 2 * y + 3 * x * x - x * y + 0.5 * y * y


def grad(x, y):
    return 1 + 6 * x - y, -2 - x + y


c = P.Pi_star @ interpolate(geo, f, grad)
pts = np.random.default_rng(0).uniform(0.1, 0.6, (5, 2))
err = np.abs(scaled_monomials(pts, geo.centroid, geo.diameter) @ c - f(*pts.T)).max()
print(f"quadratic reproduced by the projector, max error {err:.1e}")

w = np.linalg.eigvalsh(el.stiffness.A)
print("stiffness eigenvalues:", np.array2string(w, precision=3))
print("zero modes (affine functions):", int(np.sum(w < 1e-10 * w.max())))
