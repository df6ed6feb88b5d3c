"""Integration-by-parts density rho with mu(Y g) = mu(g rho).

rho0 solves the scalar fixed point (I - L_h) rho0 = -Xu h / h, where
(L_h u)[i] = h[i] u[i-1], and rho = a rho0 - Xu a.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractionViolation
from .neumann import NeumannSolution, lift_contraction, neumann_solve
from .torus import dot


def solve_rho0(frame, n=40, tol: Optional[float] = None,
               check_decay=True) -> NeumannSolution:
    """Truncated Neumann solve for rho0 along the frame's points."""
    h = frame.h
    valid = frame.valid["Xu_h"]
    source = np.zeros_like(h)
    source[1:] = -frame.Xu_h[1:] / h[1:]
    sol = neumann_solve(h, source, n, valid_from=valid, tol=tol, label="rho0")
    sol.contraction = lift_contraction(h, n, valid, scalar=True)
    if check_decay and sol.contraction >= 1.0:
        raise ContractionViolation(
            f"rho0: running product of h does not decay (rate {sol.contraction:.3g})")
    return sol


def assemble_rho(a, Xu_a, rho0):
    return a * rho0 - Xu_a


@dataclass
class DensityField:
    points: np.ndarray
    rho0: np.ndarray
    rho: np.ndarray
    valid_from: int
    rho0_residual: float
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self, path, start: Optional[int] = None):
        """Write (k, [chain,] x, y, rho0, rho) for valid points."""
        start = self.valid_from if start is None else start
        pts = self.points[start:]
        batched = pts.ndim == 3
        with open(path, "w", newline="") as fh:
            fh.write("# spacesplit density v1\n")
            w = csv.writer(fh)
            w.writerow(["k", "chain", "x", "y", "rho0", "rho"] if batched
                       else ["k", "x", "y", "rho0", "rho"])
            r0, r = self.rho0[start:], self.rho[start:]
            for k in range(pts.shape[0]):
                if batched:
                    for c in range(pts.shape[1]):
                        w.writerow([k + start, c, *map(repr, pts[k, c]),
                                    repr(r0[k, c]), repr(r[k, c])])
                else:
                    w.writerow([k + start, *map(repr, pts[k]), repr(r0[k]), repr(r[k])])


def compute_density(frame, split, n=40, tol: Optional[float] = None) -> DensityField:
    """rho0 from the frame and rho from the jet-decomposed field."""
    sol = solve_rho0(frame, n, tol=tol)
    rho = assemble_rho(split.a, split.Xu_a, sol.v)
    valid = max(sol.valid_from, split.jet_valid_from)
    out = DensityField(frame.points, sol.v, rho, valid, sol.sup_residual)
    out.diagnostics["rho0_contraction"] = sol.contraction
    return out


def adjoint_identity_check(points, Y, rho, f, g, valid_from=0, n_batches=None,
                           sigmas=3.0) -> dict:
    """Compare mu(Yf g) with mu(f (-Yg + rho g)) by orbit averages.

    Both sides are averaged over the same samples; the pass/fail test uses
    the batch-means error of the paired difference.
    """
    from .quadrature import batch_means

    pts = points[valid_from:]
    Y = Y[valid_from:]
    rho = rho[valid_from:]
    fv, gv = f(pts), g(pts)
    Yf = dot(f.gradient(pts), Y)
    Yg = dot(g.gradient(pts), Y)
    lhs = Yf * gv
    rhs = fv * (-Yg + rho * gv)
    l_mean, l_err = batch_means(lhs, n_batches)
    r_mean, r_err = batch_means(rhs, n_batches)
    d_mean, d_err = batch_means(lhs - rhs, n_batches)
    return {
        "lhs": l_mean, "lhs_stderr": l_err,
        "rhs": r_mean, "rhs_stderr": r_err,
        "difference": d_mean, "difference_stderr": d_err,
        "passed": bool(abs(d_mean) <= sigmas * max(d_err, 1e-300)),
    }
