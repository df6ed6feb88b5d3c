"""Unstable direction along orbits and the scalars derived from it.

Given forward-ordered orbit points (axis 0 is time), this module computes
the unit unstable field Xu by windowed power iteration, the expansion
reciprocal h = <T_* Xu, Xu>^{-1}, the curvature nabla_{Xu} Xu through its
own fixed-point equation, and the derivative Xu h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateStart, NonHyperbolicSample
from .neumann import lift_contraction, neumann_solve
from .torus import MapModel, OrbitSegment, dot, evolve_orbit, matvec


def orient(v):
    """Flip vectors so the first component is >= 0 (ties: second >= 0)."""
    flip = (v[..., 0] < 0) | ((v[..., 0] == 0) & (v[..., 1] < 0))
    return np.where(flip[..., None], -v, v)


def _normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def power_iterate_unstable(model: MapModel, orbit: OrbitSegment, X0,
                           stall_ratio=0.95, stall_steps=20, tol=1e-14):
    """Normalised pushforwards X^{k+1} = T_* X^k / |T_* X^k| along an orbit.

    Returns an array with one unit vector per orbit point (same leading
    shape as the orbit).  Raises DegenerateStart when the change between
    successive iterates fails to shrink (ratio above ``stall_ratio``) for
    ``stall_steps`` consecutive steps while still above ``tol``.
    """
    pts = orbit.forward_order()
    J = model.jacobian(pts[:-1])
    v = _normalize(np.broadcast_to(np.asarray(X0, dtype=float), pts.shape))[0]
    out = np.empty(pts.shape)
    out[0] = v
    prev_change = None
    stalled = 0
    for k in range(len(J)):
        w = _normalize(matvec(J[k], v))
        change = np.max(np.minimum(np.linalg.norm(w - v, axis=-1),
                                   np.linalg.norm(w + v, axis=-1)))
        if prev_change is not None and prev_change > tol and change > tol:
            stalled = stalled + 1 if change > stall_ratio * prev_change else 0
            if stalled >= stall_steps:
                raise DegenerateStart(
                    f"power iteration stalled for {stalled} steps at k={k}")
        prev_change = change
        v = w
        out[k + 1] = v
    return orient(out)


def unstable_directions(jac, n_window: int, X0=(1.0, 0.0)):
    """Windowed power iteration: Xu[i] ~ dT^n (point i - n) X0, normalised.

    ``jac[i]`` is dT at point i.  Entries with i >= n_window have seen the
    full window; earlier entries have seen i steps.
    """
    v = np.broadcast_to(np.asarray(X0, dtype=float), jac.shape[:-1]).copy()
    v = _normalize(v)
    T = jac.shape[0]
    for m in range(min(n_window, T - 1), 0, -1):
        v[m:] = _normalize(matvec(jac[:T - m], v[m:]))
    return orient(v)


def angle_error_ratio(seq, reference, floor=1e-13) -> float:
    """Geometric-mean ratio of successive angle errors to ``reference``.

    Steps where the error has reached ``floor`` are ignored.
    """
    ref = _normalize(np.asarray(reference, dtype=float))
    cos = np.abs(np.clip(dot(_normalize(seq), ref), -1.0, 1.0))
    sin = np.abs(seq[..., 0] * ref[..., 1] - seq[..., 1] * ref[..., 0])
    err = np.arctan2(sin, cos)
    err = err[err > floor]
    if len(err) < 2:
        return float("nan")
    return float(np.exp(np.mean(np.diff(np.log(err)))))


def compute_h(jac, Xu, valid_from=0, check=True):
    """h[i] = 1 / <dT_{i-1} Xu[i-1], Xu[i]>; h[0] is set to 0."""
    h = np.zeros(Xu.shape[:-1])
    expansion = dot(matvec(jac[:-1], Xu[:-1]), Xu[1:])
    h[1:] = 1.0 / expansion
    if check:
        bad = np.abs(expansion[valid_from:]) <= 1.0
        if np.any(bad):
            k = int(np.argwhere(bad)[0][0]) + valid_from + 1
            raise NonHyperbolicSample(
                f"expansion <T_*Xu, Xu> <= 1 at orbit index {k}")
    return h


def h_growth_rate(h, n: int, valid_from=0) -> float:
    """Largest running geometric mean (prod_{l=1..n} |h|)^(1/n) over windows."""
    logs = np.log(np.abs(h[valid_from:]))
    if logs.shape[0] < n:
        return float("nan")
    c = np.cumsum(logs, axis=0)
    window = c[n - 1:] - np.concatenate([np.zeros((1,) + c.shape[1:]), c[:-n]])
    return float(np.exp(np.max(window) / n))


def solve_curvature(jac, hess_uu, Xu, h, n: int, valid_from=0, tol=None):
    """Curvature w = nabla_{Xu} Xu as the fixed point of

        w[i] = h[i]^2 P_i (d^2T_{i-1}(Xu, Xu) + dT_{i-1} w[i-1]),

    with P_i the projection orthogonal to Xu[i]; solved by a truncated
    Neumann series over the last n points.
    """
    P = projector(Xu)
    h2 = (h * h)[..., None]
    source = np.zeros_like(Xu)
    source[1:] = h2[1:] * matvec(P[1:], hess_uu[:-1])
    lift = np.zeros_like(jac)
    lift[1:] = h2[1:, ..., None] * (P[1:] @ jac[:-1])
    return neumann_solve(lift, source, n, valid_from=valid_from, tol=tol,
                         label="curvature")


def compute_Xu_h(jac, hess_uu, Xu, h, curvature):
    """Xu h from differentiating h = <T_* Xu, Xu>^{-1} along Xu."""
    out = np.zeros_like(h)
    pushed = matvec(jac[:-1], Xu[:-1])
    d_pushed = h[1:, ..., None] * (hess_uu[:-1] + matvec(jac[:-1], curvature[:-1]))
    h2 = h[1:] ** 2
    out[1:] = -h2 * dot(d_pushed, Xu[1:]) - h2 * dot(pushed, curvature[1:])
    return out


def projector(Xu):
    """Orthogonal projection onto the complement of Xu, per point."""
    return np.eye(2) - Xu[..., :, None] * Xu[..., None, :]


@dataclass
class UnstableFrame:
    """Unstable direction and cocycle scalars along orbit points.

    ``valid[name]`` is the first time index at which that field has seen
    its full window.
    """

    model: MapModel
    points: np.ndarray
    jac: np.ndarray
    Xu: np.ndarray
    h: np.ndarray
    hess_uu: np.ndarray
    curvature: np.ndarray
    Xu_h: np.ndarray
    valid: dict
    diagnostics: dict = field(default_factory=dict)
    _dJu: Optional[np.ndarray] = None

    @property
    def projector(self):
        return projector(self.Xu)

    def jacobian_along_unstable(self):
        """Matrices v -> d^2T(Xu, v) at every point (cached)."""
        if self._dJu is None:
            self._dJu = self.model.jacobian_derivative(self.points, self.Xu)
        return self._dJu

    @property
    def valid_from(self) -> int:
        return max(self.valid.values())

    def to_csv(self, path, chain=0):
        """(k, x, y, Xu_x, Xu_y, h, curv_x, curv_y, Xu_h) for one chain."""
        sel = (slice(None), chain) if self.points.ndim == 3 else (slice(None),)
        cols = [self.points[sel], self.Xu[sel], self.h[sel][:, None],
                self.curvature[sel], self.Xu_h[sel][:, None]]
        table = np.concatenate(cols, axis=1)
        with open(path, "w") as fh:
            fh.write("# spacesplit frame v1\n")
            fh.write("k,x,y,Xu_x,Xu_y,h,curv_x,curv_y,Xu_h\n")
            for k in range(self.valid_from, table.shape[0]):
                fh.write(f"{k}," + ",".join(repr(float(v)) for v in table[k]) + "\n")


def build_frame(model: MapModel, points, n_o1=40, n_curvature=40, X0=(1.0, 0.0),
                sign=1.0, tol: Optional[float] = None,
                check_hyperbolic=True) -> UnstableFrame:
    """Run power iteration, h, curvature and Xu h over forward-ordered points.

    ``sign=-1`` flips the global orientation of Xu after the convention is
    applied; all downstream densities are invariant under this flip.
    """
    points = np.asarray(points, dtype=float)
    jac = model.jacobian(points)
    Xu = sign * unstable_directions(jac, n_o1, X0)
    valid = {"Xu": n_o1}
    h = compute_h(jac, Xu, valid_from=n_o1, check=check_hyperbolic)
    valid["h"] = n_o1 + 1
    hess_uu = model.hessian_action(points, Xu, Xu)
    curv = solve_curvature(jac, hess_uu, Xu, h, n_curvature,
                           valid_from=valid["h"], tol=tol)
    valid["curvature"] = curv.valid_from
    Xu_h = compute_Xu_h(jac, hess_uu, Xu, h, curv.v)
    valid["Xu_h"] = curv.valid_from + 1
    frame = UnstableFrame(model, points, jac, Xu, h, hess_uu, curv.v, Xu_h, valid)
    frame.diagnostics["curvature_residual"] = curv.sup_residual
    lift = np.zeros_like(jac)
    h2 = (h * h)[1:, ..., None, None]
    lift[1:] = h2 * (frame.projector[1:] @ jac[:-1])
    frame.diagnostics["curvature_lift_contraction"] = lift_contraction(
        lift, n_curvature, valid["h"])
    return frame


def unstable_at(model: MapModel, p, n_o1=40, X0=(1.0, 0.0)):
    """Xu at arbitrary points p via their backward orbits (Newton inverse)."""
    back = evolve_orbit(model, p, n_o1, "backward").forward_order()
    return unstable_directions(model.jacobian(back), n_o1, X0)[-1]


def expansion_rate(jac, n: int, valid_from=0) -> float:
    """Largest n-step growth rate of ||dT^n|| along the orbit (kappa proxy)."""
    return lift_contraction(jac, n, valid_from)


def stable_contraction(frame: UnstableFrame, n=20) -> float:
    """Measured contraction of the projected derivative P dT (eta proxy)."""
    lift = np.zeros_like(frame.jac)
    lift[1:] = frame.projector[1:] @ frame.jac[:-1]
    return lift_contraction(lift, n, frame.valid["Xu"])


def lambda_unstable(matrix=((2, 1), (1, 1))) -> float:
    A = np.asarray(matrix, dtype=float)
    tr = A[0, 0] + A[1, 1]
    return (tr + math.sqrt(tr * tr - 4)) / 2
