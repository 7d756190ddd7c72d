"""Error norms and observed convergence rates."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .polyquad import (default_quad_degree, element_points, element_weights, l2_project_tri,
                       tri_quadrature)
from .space import WeakFunction
from .weak_gradient import WeakGradientOperator, weak_gradient_at


def _rule(space, quad_degree):
    return tri_quadrature(quad_degree or default_quad_degree(space.k))


def error_h1w(grad_u, uh: WeakFunction, ops: WeakGradientOperator, quad_degree=None) -> float:
    """||grad_w u_h - grad u||_h."""
    mesh = uh.space.mesh
    rule = _rule(uh.space, quad_degree)
    x = element_points(mesh, rule)
    w = element_weights(mesh, rule)
    diff = weak_gradient_at(ops, uh.local(), x) - grad_u(x)
    return math.sqrt(float(np.einsum("fq,fqd,fqd->", w, diff, diff)))


def error_l2(u, uh: WeakFunction, mode: str = "projected", quad_degree=None) -> float:
    """L2 error of the interior part.

    ``mode="projected"`` measures ``||Q_h^0 u - u_h^0||``, the discrete L2
    error used in the reference convergence tables (for k = 0 it is the
    only reading that decays at order 2). ``mode="quadrature"`` is the
    continuous ``||u - u_h^0||`` by elementwise quadrature.
    """
    if mode == "projected":
        return error_superclose(u, uh, quad_degree)
    if mode != "quadrature":
        raise ValueError(f"unknown L2 mode {mode!r}")
    mesh = uh.space.mesh
    rule = _rule(uh.space, quad_degree)
    x = element_points(mesh, rule)
    w = element_weights(mesh, rule)
    diff = u(x) - uh.eval_interior(x)
    return math.sqrt(float(np.einsum("fq,fq,fq->", w, diff, diff)))


def linf_samples(mesh, rule) -> np.ndarray:
    """Quadrature points followed by the three vertices of each element, (F, q + 3, 2)."""
    return np.concatenate((element_points(mesh, rule), mesh.vertices[mesh.elements]), axis=1)


def error_linf(u, uh: WeakFunction, mode: str = "centroid", quad_degree=None) -> float:
    """max |u - u_h^0| over a sample set.

    ``mode="centroid"`` samples element centroids (the reference tables'
    convention); ``mode="samples"`` uses quadrature points plus vertices.
    """
    if mode == "centroid":
        x = uh.space.mesh.centroids[:, None, :]
    elif mode == "samples":
        x = linf_samples(uh.space.mesh, _rule(uh.space, quad_degree))
    else:
        raise ValueError(f"unknown L-infinity mode {mode!r}")
    return float(np.abs(u(x) - uh.eval_interior(x)).max())


def interior_gram(space, quad_degree=None) -> np.ndarray:
    """(F, N_k, N_k) element Gram matrices of the interior basis."""
    mesh = space.mesh
    rule = tri_quadrature(2 * space.k)
    x = element_points(mesh, rule)
    w = element_weights(mesh, rule)
    phi = space.interior_basis.eval(x)
    return np.einsum("fq,fqi,fqj->fij", w, phi, phi)


def error_superclose(u, uh: WeakFunction, quad_degree=None) -> float:
    """||Q_h^0 u - u_h^0||, evaluated exactly in coefficient space."""
    space = uh.space
    q = l2_project_tri(u, space.mesh, space.k, quad_degree=quad_degree or default_quad_degree(space.k),
                       basis=space.interior_basis)
    d = q - uh.interior
    return math.sqrt(max(float(np.einsum("fi,fij,fj->", d, interior_gram(space), d)), 0.0))


def rate(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    """ln(e_h / e_{h/2}) / ln 2; NaN when either error is not positive."""
    if not (e_coarse > 0 and e_fine > 0) or not (math.isfinite(e_coarse) and math.isfinite(e_fine)):
        return math.nan
    return math.log(e_coarse / e_fine) / math.log(ratio)


NORMS = ("h1w", "l2", "linf", "superclose")


@dataclass
class ErrorRecord:
    level: int
    h: float
    err_h1w: float
    err_l2: float
    err_linf: float
    err_superclose: float
    n: int | None = None

    def __post_init__(self):
        for name in NORMS:
            v = getattr(self, f"err_{name}")
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"err_{name} must be finite and nonnegative, got {v}")


@dataclass
class ConvergenceReport:
    records: list[ErrorRecord] = field(default_factory=list)
    problem: str = ""
    k: int = 0

    def rates(self, norm: str) -> list[float]:
        """Rate for each consecutive pair of levels (length len(records) - 1)."""
        e = [getattr(r, f"err_{norm}") for r in self.records]
        out = []
        for a, b, ra, rb in zip(e, e[1:], self.records, self.records[1:]):
            out.append(rate(a, b, ra.h / rb.h))
        return out

    def rows(self) -> list[dict]:
        rows = []
        rates = {m: [None] + self.rates(m) for m in NORMS}
        for i, r in enumerate(self.records):
            row = {"level": r.level, "h": r.h}
            for m in NORMS:
                row[f"err_{m}"] = getattr(r, f"err_{m}")
                row[f"rate_{m}"] = rates[m][i]
            rows.append(row)
        return rows

    def to_csv(self, fh) -> None:
        cols = ["level", "h"] + [f"{p}_{m}" for m in NORMS for p in ("err", "rate")]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows():
            w.writerow([_fmt_csv(c, row[c]) for c in cols])

    def to_table(self) -> str:
        head = f"{'mesh h':>8} " + " ".join(f"{'err_' + m:>15} {'rate':>7}" for m in NORMS)
        lines = [head, "-" * len(head)]
        for rec, row in zip(self.records, self.rows()):
            hs = f"1/{rec.n}" if rec.n else f"{rec.h:.4g}"
            cells = []
            for m in NORMS:
                r = row[f"rate_{m}"]
                cells.append(f"{row[f'err_{m}']:>15.3e} {'-' if r is None else f'{r:.4f}':>7}")
            lines.append(f"{hs:>8} " + " ".join(cells))
        return "\n".join(lines) + "\n"


def _fmt_csv(col, v):
    if v is None:
        return ""
    if col == "level":
        return str(v)
    if math.isnan(v):
        return "nan"
    if col == "h":
        return repr(float(v))
    return f"{v:.4f}" if col.startswith("rate") else f"{v:.3e}"


def rates(errors, hs=None) -> list[float]:
    """Pairwise rates for an ordered error sequence on successively halved meshes."""
    errors = list(errors)
    if len(errors) < 2:
        raise ValueError("need at least two levels")
    ratios = [2.0] * (len(errors) - 1) if hs is None else [a / b for a, b in zip(hs, hs[1:])]
    return [rate(a, b, q) for a, b, q in zip(errors, errors[1:], ratios)]
