"""Broken-norm errors of the projected solution, convergence orders and table output."""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import batch_rule
from .element import monomial_gradients, monomial_hessians, scaled_monomials

ERROR_DEGREE = 10
ERROR_KEYS = ("u_l2", "u_h1", "u_h2", "v_l2", "v_h1", "v_h2")
CSV_COLUMNS = ["level", "h", "ndof"]
for _k in ERROR_KEYS:
    CSV_COLUMNS += [f"err_{_k}", f"ord_{_k}"]
CSV_COLUMNS.append("newton_iters")


@dataclass
class ConvergenceRecord:
    level: int
    h_max: float
    n_dof: int
    errors: dict
    newton_iters: int = 0
    orders: dict = field(default_factory=dict)


def _field_errors(disc, coeffs, exact, degree):
    """Squared L2, H1-seminorm and H2-seminorm errors of exact - Pi^h field."""
    tot = np.zeros(3)
    for b in disc.batches:
        els = [disc.elements[c] for c in b.cells]
        pts, w = batch_rule(disc, b, degree)
        xc = np.array([e.geometry.centroid for e in els])[:, None, :]
        hk = np.array([e.geometry.diameter for e in els])
        c = coeffs[b.cells]
        m = scaled_monomials(pts, xc, hk[:, None])
        dm = monomial_gradients(pts, xc, hk[:, None])
        x, y = pts[..., 0], pts[..., 1]
        e0 = exact(x, y) - np.einsum("cqj,cj->cq", m, c)
        gx, gy = exact.grad(x, y)
        grad_h = np.einsum("cqjd,cj->cqd", dm, c)
        e1 = (gx - grad_h[..., 0]) ** 2 + (gy - grad_h[..., 1]) ** 2
        hxx, hxy, hyy = exact.hessian(x, y)
        Hh = np.einsum("cjab,cj->cab", np.array([monomial_hessians(h) for h in hk]), c)
        e2 = ((hxx - Hh[:, None, 0, 0]) ** 2 + 2 * (hxy - Hh[:, None, 0, 1]) ** 2
              + (hyy - Hh[:, None, 1, 1]) ** 2)
        tot += [np.sum(w * e0 ** 2), np.sum(w * e1), np.sum(w * e2)]
    return tot


def compute_errors(disc, X, problem, degree=ERROR_DEGREE):
    """Errors of u - Pi^h u_h and v - Pi^h v_h in L2, broken H1 and broken H2."""
    n = disc.n_dof
    X = np.asarray(X, dtype=float)
    out = {}
    for name, exact, part in (("u", problem.u, X[:n]), ("v", problem.v, X[n:])):
        sq = _field_errors(disc, disc.projected_coefficients(part), exact, degree)
        for k, s in zip(("l2", "h1", "h2"), sq):
            out[f"{name}_{k}"] = float(math.sqrt(max(s, 0.0)))
    return out


def convergence_orders(records):
    """Fill order_k = log(e_{k-1}/e_k) / log(h_{k-1}/h_k); NaN where undefined."""
    for i, rec in enumerate(records):
        rec.orders = {}
        if i == 0:
            continue
        prev = records[i - 1]
        for k in ERROR_KEYS:
            e0, e1 = prev.errors[k], rec.errors[k]
            if e0 > 0 and e1 > 0 and prev.h_max != rec.h_max:
                rec.orders[k] = math.log(e0 / e1) / math.log(prev.h_max / rec.h_max)
            else:
                rec.orders[k] = math.nan
    return records


def _row(rec):
    row = {"level": rec.level, "h": rec.h_max, "ndof": rec.n_dof,
           "newton_iters": rec.newton_iters}
    for k in ERROR_KEYS:
        row[f"err_{k}"] = rec.errors[k]
        row[f"ord_{k}"] = rec.orders.get(k)
    return row


def to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        row = _row(rec)
        w.writerow(["" if row[c] is None else row[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def to_markdown(records):
    lines = []
    for name in ("u", "v"):
        lines.append(f"| h | err({name}) | Order | err(grad {name}) | Order | err(H{name}) | Order |")
        lines.append("|---|---|---|---|---|---|---|")
        for rec in records:
            cells = [f"{rec.h_max:.6f}"]
            for k in ("l2", "h1", "h2"):
                key = f"{name}_{k}"
                cells.append(f"{rec.errors[key]:.6f}")
                o = rec.orders.get(key)
                cells.append("-" if o is None else ("nan" if math.isnan(o) else f"{o:.4f}"))
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)


def to_gnuplot(records):
    """Whitespace-separated columns as in the CSV, '?' for missing orders."""
    lines = ["# " + " ".join(CSV_COLUMNS)]
    for rec in records:
        row = _row(rec)
        lines.append(" ".join("?" if row[c] is None else str(row[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


FORMATS = {"csv": to_csv, "markdown": to_markdown, "md": to_markdown, "dat": to_gnuplot}


def emit(records, fmt="csv", path=None):
    """Render records in `fmt`; write to `path` when given. Returns the text."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {sorted(FORMATS)}")
    text = FORMATS[fmt](records)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
