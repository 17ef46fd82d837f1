"""Quadratic convergence of Newton's method.

Each update norm is roughly the square of the previous one until the
iteration reaches the rounding floor of the linear solves. The floor grows
with the conditioning of the stiffness, so finer meshes show it sooner.
"""
import math

from vkplate.assembly import Discretization, assemble_load
from vkplate.mesh import generate_mesh
from vkplate.problems import lshape_problem, square_problem
from vkplate.solver import newton_solve

for name, problem, domain in (("square", square_problem(), "unit_square"),
                              ("lshape", lshape_problem(), "l_shape")):
    for n in (4, 8, 16):
        disc = Discretization(generate_mesh("triangular", domain, n=n))
        _, log = newton_solve(disc, assemble_load(disc, problem.f, problem.g))
        d = log.update_norms
        p = math.log(d[-1] / d[-2]) / math.log(d[-2] / d[-3])
        print(f"{name:7s} n={n:3d} updates " + " ".join(f"{x:.2e}" for x in d) + f"   last exponent {p:.2f}")
