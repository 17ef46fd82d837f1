"""Command-line entry point: ``vkplate mesh generate | solve | convergence``."""
import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

from . import mesh as meshmod
from .assembly import Discretization, assemble_load
from .problems import PROBLEMS, get_problem
from .report import FORMATS, ConvergenceRecord, compute_errors, convergence_orders, emit
from .solver import NewtonConvergenceError, newton_solve

log = logging.getLogger("vkplate")

DEFAULT_DOMAIN = {"square": "unit_square", "lshape": "l_shape"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    problem: str = "square"
    family: str = "triangular"
    domain: str = "unit_square"
    levels: int = 5
    n: int = 4
    seed: int = None
    lloyd_iters: int = 3
    tol: float = 1e-8
    max_iter: int = 20
    output: str = None
    format: str = "csv"
    threads: int = 1
    mesh_file: str = None

    def validate(self):
        if self.family not in meshmod.FAMILIES:
            raise UsageError(f"unknown family {self.family!r}")
        if self.domain not in meshmod.DOMAINS:
            raise UsageError(f"unknown domain {self.domain!r}")
        if self.domain == "l_shape" and self.family != "triangular":
            raise UsageError("the l-shape domain supports the triangular family only")
        if self.n < 1:
            raise UsageError("--n must be >= 1")
        if self.family.startswith("voronoi") and self.n < 2:
            raise UsageError("voronoi families need --n >= 2")
        if self.seed is not None and self.seed < 0:
            raise UsageError("--seed must be a nonnegative integer")
        if self.lloyd_iters < 0:
            raise UsageError("--lloyd-iters must be >= 0")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.max_iter < 1:
            raise UsageError("--max-iter must be >= 1")
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")
        if self.subcommand == "convergence":
            if self.levels < 2:
                raise UsageError("--levels must be >= 2")
            if self.format not in FORMATS:
                raise UsageError(f"unknown format {self.format!r}")
        if self.subcommand in ("solve", "convergence"):
            want = DEFAULT_DOMAIN[self.problem]
            if self.mesh_file is None and self.domain != want:
                raise UsageError(f"problem {self.problem!r} lives on domain {want!r}")
        return self


def _name(s):
    return s.replace("-", "_")


def _threads_default():
    env = os.environ.get("VKPLATE_THREADS")
    if env is None:
        return 1
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"VKPLATE_THREADS must be an integer, got {env!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="vkplate",
                                description="Virtual element solver for the von Karman plate equations.")
    p.add_argument("-v", "--verbose", action="store_true", help="log Newton progress")
    sub = p.add_subparsers(dest="command", required=True)

    def mesh_flags(sp, domain_default):
        sp.add_argument("--family", default="triangular", type=_name,
                        help="triangular, square, concave, voronoi-structured, voronoi-random")
        sp.add_argument("--domain", default=domain_default, type=_name,
                        help="unit-square or l-shape")
        sp.add_argument("--n", type=int, default=4, help="subdivisions per unit length (base level)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--lloyd-iters", type=int, default=3)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads for element setup (default $VKPLATE_THREADS or 1)")

    def solver_flags(sp):
        sp.add_argument("--problem", default="square", choices=sorted(PROBLEMS))
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--max-iter", type=int, default=20)

    mp = sub.add_parser("mesh", help="mesh utilities")
    msub = mp.add_subparsers(dest="mesh_command", required=True)
    gp = msub.add_parser("generate", help="generate a mesh file")
    mesh_flags(gp, "unit_square")
    gp.add_argument("-o", "--output", required=True)

    sp = sub.add_parser("solve", help="solve one manufactured problem")
    mesh_flags(sp, None)
    solver_flags(sp)
    sp.add_argument("--mesh", dest="mesh_file", default=None, help="mesh file instead of a generator")
    sp.add_argument("-o", "--output", required=True, help="solution JSON")

    cp = sub.add_parser("convergence", help="refinement study with error table")
    mesh_flags(cp, None)
    solver_flags(cp)
    cp.add_argument("--levels", type=int, default=5)
    cp.add_argument("--format", default="csv", choices=sorted(FORMATS))
    cp.add_argument("-o", "--output", default=None, help="table file (default stdout)")
    return p


def config_from_args(args):
    sub = "mesh" if args.command == "mesh" else args.command
    problem = getattr(args, "problem", "square")
    domain = args.domain or DEFAULT_DOMAIN[problem]
    threads = args.threads if args.threads is not None else _threads_default()
    return RunConfig(
        subcommand=sub, problem=problem, family=args.family, domain=domain,
        levels=getattr(args, "levels", 5), n=args.n, seed=args.seed,
        lloyd_iters=args.lloyd_iters, tol=getattr(args, "tol", 1e-8),
        max_iter=getattr(args, "max_iter", 20), output=args.output,
        format=getattr(args, "format", "csv"), threads=threads,
        mesh_file=getattr(args, "mesh_file", None)).validate()


def make_mesh(cfg, n=None):
    return meshmod.generate_mesh(cfg.family, cfg.domain, n=cfg.n if n is None else n,
                                 seed=cfg.seed, lloyd_iters=cfg.lloyd_iters)


def cmd_mesh(cfg):
    m = make_mesh(cfg)
    meshmod.save_mesh(m, cfg.output)
    print(f"wrote {cfg.output}: {m.n_cells} cells, {m.n_vertices} vertices, h_max={m.h_max:.6g}")
    return 0


def solve_on(m, problem, cfg):
    disc = Discretization(m, threads=cfg.threads)
    F = assemble_load(disc, problem.f, problem.g)
    X, nlog = newton_solve(disc, F, tol=cfg.tol, max_iter=cfg.max_iter)
    return disc, X, nlog


def _solution_payload(cfg, m, n_dof, X, nlog):
    # wall times stay out of the file so identical runs give identical bytes
    newton = {k: v for k, v in nlog.to_dict().items() if k != "times"}
    return {"problem": cfg.problem, "mesh": {"n_cells": m.n_cells, "n_vertices": m.n_vertices,
                                             "h_max": m.h_max},
            "n_dof": n_dof, "U": X[:n_dof].tolist(), "V": X[n_dof:].tolist(),
            "newton": newton}


def cmd_solve(cfg):
    m = meshmod.load_mesh(cfg.mesh_file) if cfg.mesh_file else make_mesh(cfg)
    problem = get_problem(cfg.problem)
    disc = Discretization(m, threads=cfg.threads)
    F = assemble_load(disc, problem.f, problem.g)
    status = 0
    try:
        X, nlog = newton_solve(disc, F, tol=cfg.tol, max_iter=cfg.max_iter)
    except NewtonConvergenceError as exc:
        X, nlog = exc.state, exc.log
        print(f"error: {exc}", file=sys.stderr)
        status = 3
    payload = _solution_payload(cfg, m, disc.n_dof, X, nlog)
    with open(cfg.output, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    print(f"newton iterations: {nlog.iterations}  converged: {nlog.converged}  "
          f"final update: {nlog.update_norms[-1]:.3e}  final residual: {nlog.residual_norms[-1]:.3e}")
    return status


def run_convergence(cfg):
    problem = get_problem(cfg.problem)
    records = []
    for k in range(cfg.levels):
        n = cfg.n * 2 ** k
        try:
            m = make_mesh(cfg, n)
            disc, X, nlog = solve_on(m, problem, cfg)
            errs = compute_errors(disc, X, problem)
        except Exception as exc:
            raise RuntimeError(f"level {k} (n={n}): {exc}") from exc
        log.info("level %d n=%d h=%.4g ndof=%d iters=%d", k, n, m.h_max, disc.n_dof, nlog.iterations)
        records.append(ConvergenceRecord(k, m.h_max, disc.n_dof, errs, nlog.iterations))
    return convergence_orders(records)


def cmd_convergence(cfg):
    records = run_convergence(cfg)
    text = emit(records, cfg.format, cfg.output)
    if cfg.output is None:
        sys.stdout.write(text)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except UsageError as exc:
        parser.error(str(exc))
    try:
        if cfg.subcommand == "mesh":
            return cmd_mesh(cfg)
        if cfg.subcommand == "solve":
            return cmd_solve(cfg)
        return cmd_convergence(cfg)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
