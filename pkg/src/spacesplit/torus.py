"""Torus state space, smooth maps with first and second derivatives, orbits.

Points are arrays whose last axis has length 2 and holds (x, y) in [0, 1).
Tangent vectors live in the global flat chart, so they are plain arrays of
the same shape and parallel transport is the identity.  Every callable
below is vectorised over arbitrary leading axes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InversionFailure

TWO_PI = 2.0 * math.pi

ArrayFn = Callable[[np.ndarray], np.ndarray]


def wrap(p):
    """Reduce coordinates mod 1 into [0, 1)."""
    p = np.mod(p, 1.0)
    # np.mod returns 1.0 for tiny negative inputs
    return np.where(p >= 1.0, 0.0, p)


def torus_delta(p, q):
    """Shortest displacement p - q on the flat torus, in [-0.5, 0.5)."""
    return np.mod(np.asarray(p) - np.asarray(q) + 0.5, 1.0) - 0.5


def torus_distance(p, q):
    return np.linalg.norm(torus_delta(p, q), axis=-1)


def matvec(M, v):
    return np.einsum("...ij,...j->...i", M, v)


def dot(u, v):
    return np.einsum("...i,...i->...", u, v)


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(wrap(self.x)))
        object.__setattr__(self, "y", float(wrap(self.y)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @classmethod
    def from_array(cls, p) -> "TorusPoint":
        return cls(float(p[0]), float(p[1]))


def _as_points(p) -> np.ndarray:
    if isinstance(p, TorusPoint):
        return p.as_array()
    return np.asarray(p, dtype=float)


def fd_jacobian(fn: ArrayFn, p, step=1e-6, periodic=False):
    """Central-difference Jacobian d fn / d p, shape (..., m, 2)."""
    p = _as_points(p)
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        plus, minus = fn(p + e), fn(p - e)
        diff = torus_delta(plus, minus) if periodic else plus - minus
        cols.append(diff / (2.0 * step))
    return np.stack(cols, axis=-1)


class VectorField:
    """A periodic vector field X with its first and second derivatives.

    ``jacobian(p)[..., i, j]`` is dX_i/dx_j.  ``hessian(p, u, v)`` is the
    second derivative d^2X_p(u, v).  Missing derivatives fall back to
    central finite differences.
    """

    def __init__(self, value: ArrayFn, jacobian: Optional[ArrayFn] = None,
                 hessian=None, name="X", fd_step=1e-6):
        self._value = value
        self._jacobian = jacobian
        self._hessian = hessian
        self.name = name
        self.fd_step = fd_step

    @property
    def has_analytic_jacobian(self) -> bool:
        return self._jacobian is not None

    def __call__(self, p):
        return self._value(_as_points(p))

    def jacobian(self, p):
        p = _as_points(p)
        if self._jacobian is not None:
            return self._jacobian(p)
        return fd_jacobian(self._value, p, self.fd_step)

    def directional(self, p, u):
        """Derivative of X along the tangent vector u."""
        return matvec(self.jacobian(p), u)

    def hessian(self, p, u, v):
        p = _as_points(p)
        if self._hessian is not None:
            return self._hessian(p, u, v)
        eps = 1e-5
        dJ = (self.jacobian(p + eps * u) - self.jacobian(p - eps * u)) / (2 * eps)
        return matvec(dJ, v)

    def divergence(self, p):
        J = self.jacobian(p)
        return J[..., 0, 0] + J[..., 1, 1]

    def scaled(self, alpha: float) -> "VectorField":
        return linear_combination([(alpha, self)], name=f"{alpha}*{self.name}")

    def __add__(self, other: "VectorField") -> "VectorField":
        return linear_combination([(1.0, self), (1.0, other)],
                                  name=f"{self.name}+{other.name}")

    def __sub__(self, other: "VectorField") -> "VectorField":
        return linear_combination([(1.0, self), (-1.0, other)],
                                  name=f"{self.name}-{other.name}")


def linear_combination(terms, name="X") -> VectorField:
    """Field sum(alpha_i * X_i); derivatives stay analytic when all are."""
    terms = list(terms)
    analytic = all(X.has_analytic_jacobian for _, X in terms)

    def value(p):
        return sum(a * X(p) for a, X in terms)

    def jac(p):
        return sum(a * X.jacobian(p) for a, X in terms)

    def hess(p, u, v):
        return sum(a * X.hessian(p, u, v) for a, X in terms)

    return VectorField(value, jac if analytic else None, hess, name=name)


def zero_field() -> VectorField:
    return VectorField(
        lambda p: np.zeros_like(p),
        lambda p: np.zeros(p.shape[:-1] + (2, 2)),
        lambda p, u, v: np.zeros(np.broadcast_shapes(p.shape, u.shape)),
        name="0",
    )


class Observable:
    """A scalar function f on the torus with its gradient."""

    def __init__(self, value: ArrayFn, gradient: Optional[ArrayFn] = None,
                 name="f", fd_step=1e-6):
        self._value = value
        self._gradient = gradient
        self.name = name
        self.fd_step = fd_step

    def __call__(self, p):
        return self._value(_as_points(p))

    def gradient(self, p):
        p = _as_points(p)
        if self._gradient is not None:
            return self._gradient(p)
        return fd_jacobian(lambda q: self._value(q)[..., None], p,
                           self.fd_step)[..., 0, :]

    def derivative(self, p, X):
        """Xf = <grad f, X> with X given as vectors at p."""
        return dot(self.gradient(p), X)


def constant_observable(c: float) -> Observable:
    return Observable(lambda p: np.full(p.shape[:-1], float(c)),
                      lambda p: np.zeros_like(p), name=str(c))


class MapModel:
    """A torus diffeomorphism with Jacobian and second-derivative action.

    ``hessian_action(p, u, v)`` returns d^2T_p(u, v).  When it is omitted
    the action is built from central differences of the Jacobian and
    ``hessian_mode`` reads ``"fd"``.
    """

    def __init__(self, forward: ArrayFn, jacobian: ArrayFn,
                 inverse: Optional[ArrayFn] = None, hessian_action=None,
                 name="map", fd_step=1e-5):
        self._forward = forward
        self._jacobian = jacobian
        self._inverse = inverse
        self._hessian = hessian_action
        self.name = name
        self.fd_step = fd_step
        self.hessian_mode = "analytic" if hessian_action is not None else "fd"

    def forward(self, p):
        return self._forward(_as_points(p))

    __call__ = forward

    def inverse(self, p):
        if self._inverse is None:
            raise NotImplementedError(f"{self.name} has no inverse")
        return self._inverse(_as_points(p))

    def jacobian(self, p):
        return self._jacobian(_as_points(p))

    def hessian_action(self, p, u, v):
        p = _as_points(p)
        if self._hessian is not None:
            return self._hessian(p, u, v)
        eps = self.fd_step
        dJ = (self._jacobian(p + eps * u) - self._jacobian(p - eps * u)) / (2 * eps)
        return matvec(dJ, v)

    def jacobian_derivative(self, p, u):
        """Matrix of v -> d^2T_p(u, v), i.e. the derivative of dT along u."""
        p = _as_points(p)
        u = np.broadcast_to(u, p.shape)
        cols = [self.hessian_action(p, u, np.broadcast_to(e, p.shape))
                for e in np.eye(2)]
        return np.stack(cols, axis=-1)

    def with_fd_hessian(self) -> "MapModel":
        return MapModel(self._forward, self._jacobian, self._inverse, None,
                        name=self.name, fd_step=self.fd_step)


def cat_map(matrix=((2, 1), (1, 1))) -> MapModel:
    """Linear automorphism p -> A p mod 1 for a hyperbolic A in SL(2, Z)."""
    A = np.asarray(matrix, dtype=float)
    if A.shape != (2, 2) or not np.all(A == np.round(A)):
        raise ValueError("cat map matrix must be a 2x2 integer matrix")
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if det != 1:
        raise ValueError(f"cat map matrix must have determinant 1, got {det:g}")
    if abs(A[0, 0] + A[1, 1]) <= 2:
        raise ValueError("cat map matrix must be hyperbolic (|trace| > 2)")
    A_inv = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]])

    def forward(p):
        return wrap(p @ A.T)

    def inverse(p):
        return wrap(p @ A_inv.T)

    def jacobian(p):
        return np.broadcast_to(A, p.shape[:-1] + (2, 2)).copy()

    def hessian(p, u, v):
        return np.zeros(np.broadcast_shapes(p.shape, np.shape(u), np.shape(v)))

    model = MapModel(forward, jacobian, inverse, hessian, name="cat")
    model.matrix = A
    return model


def newton_solve(fn, jac, y, seed, tol=1e-13, max_iter=50):
    """Solve fn(q) = y on the torus by Newton iteration from ``seed``."""
    q = np.array(seed, dtype=float)
    for _ in range(max_iter):
        r = torus_delta(fn(q), y)
        if np.max(np.abs(r), initial=0.0) < tol:
            return wrap(q)
        q = q - np.linalg.solve(jac(q), r[..., None])[..., 0]
    r = torus_delta(fn(q), y)
    if np.max(np.abs(r), initial=0.0) < tol:
        return wrap(q)
    raise InversionFailure(
        f"Newton inversion did not reach {tol:g} in {max_iter} iterations "
        f"(residual {np.max(np.abs(r)):.3g})")


def perturbed_map(base: MapModel, t: float, X: VectorField, name=None,
                  min_det=0.05, grid=64) -> MapModel:
    """The family T_t = T + t X o T, with exact chain-rule derivatives.

    The inverse solves q + t X(q) = y by Newton iteration seeded at y and
    then applies the base inverse, so a cat-map base gives the
    cat-map-inverse seeding.
    """
    t = float(t)
    g = (np.arange(grid) + 0.5) / grid
    sample = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    dets = np.linalg.det(np.eye(2) + t * X.jacobian(sample))
    if np.min(dets) < min_det:
        raise ValueError(
            f"|t|={abs(t):g} too large: det(I + t dX) reaches {np.min(dets):.3g}")
    eye = np.eye(2)

    def shift(q):
        return q + t * X(q)

    def shift_jac(q):
        return eye + t * X.jacobian(q)

    def forward(p):
        return wrap(shift(base.forward(p)))

    def jacobian(p):
        return shift_jac(base.forward(p)) @ base.jacobian(p)

    def hessian(p, u, v):
        q = base.forward(p)
        Jb = base.jacobian(p)
        Hb = base.hessian_action(p, u, v)
        return Hb + t * (X.hessian(q, matvec(Jb, u), matvec(Jb, v))
                         + matvec(X.jacobian(q), Hb))

    def inverse(y):
        q = newton_solve(shift, shift_jac, y, seed=y)
        return base.inverse(q)

    return MapModel(forward, jacobian, inverse, hessian,
                    name=name or f"{base.name}+{t:g}*{X.name}")


def perturbed_cat_map(t: float, X: VectorField) -> MapModel:
    return perturbed_map(cat_map(), t, X, name="perturbed_cat")


def jacobian_error(model: MapModel, points, step=1e-6) -> float:
    """Max relative deviation of the Jacobian from central differences."""
    J = model.jacobian(points)
    Jfd = fd_jacobian(model.forward, points, step, periodic=True)
    return float(np.max(np.abs(J - Jfd)) / max(np.max(np.abs(J)), 1e-300))


def hessian_error(model: MapModel, points, u, v, step=1e-6) -> float:
    """Max relative deviation of d^2T(u, v) from differences of dT."""
    H = model.hessian_action(points, u, v)
    dJ = (model.jacobian(points + step * u) - model.jacobian(points - step * u))
    Hfd = matvec(dJ / (2 * step), v)
    scale = max(np.max(np.abs(H)), np.max(np.abs(model.jacobian(points))), 1e-300)
    return float(np.max(np.abs(H - Hfd)) / scale)


@dataclass(frozen=True)
class OrbitSegment:
    """Points x0, T^{+-1} x0, ..., T^{+-n} x0 stacked along axis 0."""

    points: np.ndarray
    direction: str = "forward"

    @property
    def length(self) -> int:
        return self.points.shape[0] - 1

    def forward_order(self) -> np.ndarray:
        """Points sorted by increasing time."""
        if self.direction == "forward":
            return self.points
        return self.points[::-1]

    def to_csv(self, path):
        pts = self.points.reshape(self.points.shape[0], -1, 2)
        with open(path, "w", newline="") as fh:
            fh.write("# spacesplit orbit v1\n")
            w = csv.writer(fh)
            batched = pts.shape[1] > 1
            w.writerow(["k", "chain", "x", "y"] if batched else ["k", "x", "y"])
            for k in range(pts.shape[0]):
                for c in range(pts.shape[1]):
                    row = [k, c] if batched else [k]
                    w.writerow(row + [repr(float(pts[k, c, 0])),
                                      repr(float(pts[k, c, 1]))])


def evolve_orbit(model: MapModel, x0, n: int, direction="forward") -> OrbitSegment:
    """Iterate ``model`` (or its inverse) n times from x0.

    x0 may be a batch of points of shape (M, 2); the orbit then has shape
    (n + 1, M, 2).
    """
    if n < 1:
        raise ValueError("orbit length must be >= 1")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    step = model.forward if direction == "forward" else model.inverse
    p = wrap(_as_points(x0))
    out = np.empty((n + 1,) + p.shape)
    out[0] = p
    for k in range(n):
        p = step(p)
        out[k + 1] = p
    return OrbitSegment(out, direction)


def pushforward_field(model: MapModel, V: VectorField) -> VectorField:
    """T_* V (p) = dT_{T^{-1} p} V(T^{-1} p).

    The Jacobian is (d^2T_q(., V) + dT_q dV_q) dT_q^{-1} with q = T^{-1} p;
    second derivatives fall back to differences.
    """

    def value(p):
        q = model.inverse(_as_points(p))
        return matvec(model.jacobian(q), V(q))

    def jacobian(p):
        q = model.inverse(_as_points(p))
        Jq = model.jacobian(q)
        inner = model.jacobian_derivative(q, V(q)) + Jq @ V.jacobian(q)
        return inner @ np.linalg.inv(Jq)

    return VectorField(value, jacobian, name=f"T_*{V.name}")
