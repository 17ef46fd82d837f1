"""The re-entrant corner of the L-shaped domain.

The exact solution behaves like r^(1+alpha) near the corner, where alpha is the
smallest root above 1/2 of sin^2(alpha w) = alpha^2 sin^2(w) for w = 3 pi / 2.
The energy error therefore converges below first order.
"""
import math
import sys

from vkplate.cli import RunConfig, run_convergence
from vkplate.problems import find_alpha
from vkplate.report import to_markdown

ex = find_alpha(1.5 * math.pi)
print(f"alpha = {ex.alpha:.12f}  (residual {ex.residual:.1e})\n")

levels = int(sys.argv[1]) if len(sys.argv) > 1 else 5
cfg = RunConfig("convergence", problem="lshape", domain="l_shape", n=2, levels=levels).validate()
recs = run_convergence(cfg)
print(to_markdown(recs))
print("Newton iterations per level:", [r.newton_iters for r in recs])
