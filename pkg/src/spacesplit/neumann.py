"""Truncated Neumann solves along orbits and the coboundary splitting.

All per-point arrays are indexed by time along axis 0, possibly followed by
chain axes.  A lift is stored so that ``lift[i]`` carries the fibre over
point ``i - 1`` to the fibre over point ``i``; ``lift[0]`` is never used.
The truncated solution of (I - L) v = w is then

    v[i] = sum_{n < N} lift[i] lift[i-1] ... lift[i-n+1] w[i-n],

which only looks at the N most recent points of the window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractionViolation, DerivativeUnavailable, WindowTooShort
from .torus import dot, matvec


@dataclass
class NeumannSolution:
    v: np.ndarray
    residual: np.ndarray  # |v - L v - w| per point, nan where not checkable
    valid_from: int
    contraction: float = float("nan")

    @property
    def sup_residual(self) -> float:
        r = self.residual[self.valid_from + 1:]
        return float(np.nanmax(r)) if r.size and np.isfinite(r).any() else float("nan")


def _apply(lift, v):
    if lift.ndim == v.ndim:
        return lift * v
    return matvec(lift, v)


def _shift_apply(lift, v):
    """(L v_prev)[i] = lift[i] v[i-1]; zero at i = 0."""
    out = np.zeros_like(v)
    out[1:] = _apply(lift[1:], v[:-1])
    return out


def _residual_norm(r, scalar):
    return np.abs(r) if scalar else np.linalg.norm(r, axis=-1)


def lift_contraction(lift, n, valid_from=0, max_points=256, scalar=False) -> float:
    """Largest n-step growth rate ||lift[i] ... lift[i-n+1]||^(1/n).

    Evaluated on at most ``max_points`` windows inside the valid region; a
    value below 1 means the cocycle contracts over windows of length n.
    """
    T = lift.shape[0]
    start = valid_from + n
    if start >= T or n < 1:
        return float("nan")
    idx = np.linspace(start, T - 1, num=min(max_points, T - start)).astype(int)
    idx = np.unique(idx)
    if scalar:
        prod = np.ones((len(idx),) + lift.shape[1:])
        for k in range(n):
            prod = prod * lift[idx - k]
        norms = np.abs(prod)
    else:
        d = lift.shape[-1]
        prod = np.broadcast_to(np.eye(d), (len(idx),) + lift.shape[1:]).copy()
        for k in range(n):
            prod = prod @ lift[idx - k]
        norms = np.linalg.norm(prod, ord=2, axis=(-2, -1))
    with np.errstate(divide="ignore"):
        rate = np.exp(np.log(np.max(norms)) / n)
    return float(rate)


def neumann_solve(lift, source, n: int, valid_from=0, tol: Optional[float] = None,
                  check_contraction=False, label="neumann") -> NeumannSolution:
    """Truncated series v_N = sum_{k<N} L^k w evaluated at every point.

    Points whose window reaches before ``valid_from`` get a partial sum and
    are excluded from the returned ``valid_from``.  The a-posteriori
    residual |v - L v - w| is reported wherever both windows are valid;
    with ``tol`` set, a larger sup residual raises WindowTooShort.
    """
    if n < 1:
        raise ValueError("Neumann truncation must be >= 1")
    lift = np.asarray(lift, dtype=float)
    source = np.asarray(source, dtype=float)
    scalar = lift.ndim == source.ndim
    T = source.shape[0]
    acc = np.zeros_like(source)
    for m in range(min(n, T) - 1, -1, -1):
        acc[m:] = source[:T - m] + _apply(lift[:T - m], acc[m:])

    out_valid = valid_from + n - 1
    res = _residual_norm(acc - _shift_apply(lift, acc) - source, scalar)
    res[: out_valid + 1] = np.nan
    sol = NeumannSolution(acc, res, out_valid)
    if check_contraction:
        sol.contraction = lift_contraction(lift, n, valid_from, scalar=scalar)
        if sol.contraction >= 1.0:
            raise ContractionViolation(
                f"{label}: lift grows over the window (rate {sol.contraction:.3g})")
    if tol is not None and sol.sup_residual > tol:
        raise WindowTooShort(
            f"{label}: residual {sol.sup_residual:.3g} exceeds {tol:g} "
            f"with a window of {n} points")
    return sol


def neumann_solve_jet(lift, lift_dd, lift_dv, source, source_d, n: int):
    """Truncated solve for the block lower-triangular lift

        [[lift, 0], [lift_dv, lift_dd]]  acting on  (v, dv).

    The value slot goes through exactly the operations of neumann_solve, so
    it reproduces that solution bit for bit.
    """
    T = source.shape[0]
    acc = np.zeros_like(source)
    acc_d = np.zeros_like(source_d)
    for m in range(min(n, T) - 1, -1, -1):
        new_d = source_d[:T - m] + _apply(lift_dd[:T - m], acc_d[m:]) \
            + _apply(lift_dv[:T - m], acc[m:])
        acc[m:] = source[:T - m] + _apply(lift[:T - m], acc[m:])
        acc_d[m:] = new_d
    return acc, acc_d


@dataclass
class SplitFields:
    """Per-point decomposition X = a Xu + V - T_*V with optional jets."""

    X: np.ndarray
    V: np.ndarray
    TV: np.ndarray           # T_* V, read from V at the previous point
    Y: np.ndarray            # X - V + T_* V
    a: np.ndarray            # <Xu, Y>
    residual: np.ndarray     # |X - a Xu - V + T_* V|
    valid_from: int
    dX: Optional[np.ndarray] = None
    dV: Optional[np.ndarray] = None
    dY: Optional[np.ndarray] = None
    Xu_a: Optional[np.ndarray] = None
    jet_valid_from: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def sup_residual(self) -> float:
        r = self.residual[self.valid_from:]
        return float(np.max(r)) if r.size else float("nan")

    def to_csv(self, path, chain=0):
        """Per-point V, Y, a (and jets when present) for one chain."""
        sel = (slice(None), chain) if self.X.ndim == 3 else (slice(None),)
        cols = [self.V[sel], self.Y[sel], self.a[sel][:, None], self.residual[sel][:, None]]
        head = ["V_x", "V_y", "Y_x", "Y_y", "a", "residual"]
        start = self.valid_from
        if self.dV is not None:
            cols += [self.dV[sel], self.dY[sel], self.Xu_a[sel][:, None]]
            head += ["dV_x", "dV_y", "dY_x", "dY_y", "Xu_a"]
            start = self.jet_valid_from
        table = np.concatenate(cols, axis=1)
        with open(path, "w") as fh:
            fh.write("# spacesplit split v1\n")
            fh.write("k," + ",".join(head) + "\n")
            for k in range(start, table.shape[0]):
                fh.write(f"{k}," + ",".join(repr(float(v)) for v in table[k]) + "\n")


def _value_lift(frame):
    lift = np.zeros_like(frame.jac)
    lift[1:] = frame.projector[1:] @ frame.jac[:-1]
    return lift


def decompose_field(frame, X, n=40, tol: Optional[float] = None) -> SplitFields:
    """Split X into a part along Xu and the coboundary V - T_*V.

    V solves (I - L_{P dT}) V = X with P the orthogonal projection onto the
    complement of Xu; Y = X - V + T_*V is then along Xu up to the
    truncation residual.
    """
    Xv = X(frame.points)
    lift = _value_lift(frame)
    sol = neumann_solve(lift, Xv, n, valid_from=frame.valid["Xu"],
                        label="decomposition")
    V = sol.v
    TV = np.zeros_like(V)
    TV[1:] = matvec(frame.jac[:-1], V[:-1])
    Y = Xv - V + TV
    a = dot(frame.Xu, Y)
    residual = np.linalg.norm(Xv - a[..., None] * frame.Xu - V + TV, axis=-1)
    split = SplitFields(Xv, V, TV, Y, a, residual, sol.valid_from + 1)
    split.diagnostics["lift_contraction"] = lift_contraction(
        lift, n, frame.valid["Xu"])
    split.diagnostics["sup_residual"] = split.sup_residual
    if tol is not None and split.sup_residual > tol:
        raise WindowTooShort(
            f"decomposition: residual {split.sup_residual:.3g} exceeds {tol:g} "
            f"with a window of {n} points")
    return split


def unstable_derivative(frame, X, mode="auto", fd_step=1e-5):
    """Derivative of X along Xu at every frame point."""
    if mode == "auto":
        mode = "analytic" if X.has_analytic_jacobian else "fd"
    if mode == "analytic":
        if not X.has_analytic_jacobian:
            raise DerivativeUnavailable(
                f"field {X.name} has no analytic Jacobian")
        return X.directional(frame.points, frame.Xu)
    if mode == "fd":
        e = fd_step * frame.Xu
        return (X(frame.points + e) - X(frame.points - e)) / (2 * fd_step)
    raise DerivativeUnavailable(f"derivative mode {mode!r} is not enabled")


def jet_decompose(frame, X, n=40, mode="auto", fd_step=1e-5,
                  tol: Optional[float] = None) -> SplitFields:
    """decompose_field plus the unstable derivatives of V, Y and a."""
    split = decompose_field(frame, X, n, tol=tol)
    dX = unstable_derivative(frame, X, mode, fd_step)
    J, P, h, Xu, c = frame.jac, frame.projector, frame.h, frame.Xu, frame.curvature
    dJu = frame.jacobian_along_unstable()

    lift = _value_lift(frame)
    lift_dd = np.zeros_like(lift)
    lift_dd[1:] = h[1:, ..., None, None] * lift[1:]
    dP = -(c[..., :, None] * Xu[..., None, :] + Xu[..., :, None] * c[..., None, :])
    lift_dv = np.zeros_like(lift)
    lift_dv[1:] = dP[1:] @ J[:-1] + h[1:, ..., None, None] * (P[1:] @ dJu[:-1])

    V, dV = neumann_solve_jet(lift, lift_dd, lift_dv, split.X, dX, n)
    dTV = np.zeros_like(dV)
    dTV[1:] = h[1:, ..., None] * (matvec(dJu[:-1], V[:-1]) + matvec(J[:-1], dV[:-1]))
    dY = dX - dV + dTV
    split.dX, split.dV, split.dY = dX, dV, dY
    split.Xu_a = dot(c, split.Y) + dot(Xu, dY)
    base = max(frame.valid["curvature"], frame.valid["h"])
    split.jet_valid_from = base + n
    split.diagnostics["jet_value_matches"] = bool(np.array_equal(V, split.V))
    split.diagnostics["jet_lift_contraction"] = _jet_contraction(
        lift, lift_dd, lift_dv, n, base)
    return split


def _jet_contraction(lift, lift_dd, lift_dv, n, valid_from):
    top = np.concatenate([lift, np.zeros_like(lift)], axis=-1)
    bottom = np.concatenate([lift_dv, lift_dd], axis=-1)
    return lift_contraction(np.concatenate([top, bottom], axis=-2), n, valid_from)
