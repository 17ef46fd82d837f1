"""Convergence on the unit square for each mesh family.

u = x^2 y^2 (1-x)^2 (1-y)^2, v = sin^2(pi x) sin^2(pi y), loads manufactured.
Energy errors should fall like h and L2/H1 errors like h^2.
"""
import sys

from vkplate.cli import RunConfig, run_convergence
from vkplate.report import to_markdown

levels = int(sys.argv[1]) if len(sys.argv) > 1 else 4
for family in ("triangular", "square", "concave", "voronoi_structured", "voronoi_random"):
    cfg = RunConfig("convergence", problem="square", family=family, n=4, levels=levels,
                    seed=42 if family == "voronoi_random" else None).validate()
    recs = run_convergence(cfg)
    print(f"## {family}  (Newton iterations per level: {[r.newton_iters for r in recs]})\n")
    print(to_markdown(recs))
