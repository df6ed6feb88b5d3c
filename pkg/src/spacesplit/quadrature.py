"""Integrals against the invariant measure: orbit averages and curve sums.

Orbit averages run an ensemble of chains started from uniform random
points; chains are advanced together so arrays are shaped (time, chain).
Error bars come from batch means.  The deterministic method pushes a short
straight segment forward n times and takes a weighted Riemann sum with a
smooth compactly supported density on the segment.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import NodeBudgetExceeded
from .torus import evolve_orbit, matvec, wrap


@dataclass
class MonteCarloEstimate:
    mean: float
    stderr: float
    N: int
    seed: Optional[int]
    n_batches: int = 0

    def interval(self, sigmas=3.0):
        return self.mean - sigmas * self.stderr, self.mean + sigmas * self.stderr


def batch_means(values, n_batches: Optional[int] = None):
    """Mean and batch-means standard error of a (time,) or (time, chain) array.

    Each chain is cut into contiguous blocks so that the total number of
    batches is close to ``n_batches`` (default ceil(sqrt(N))).  Chains are
    never merged into one batch.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    v = v.reshape(v.shape[0], -1)
    T, M = v.shape
    N = T * M
    if n_batches is None:
        n_batches = math.ceil(math.sqrt(N))
    per_chain = max(1, min(T, round(n_batches / M)))
    size = T // per_chain
    blocks = v[: size * per_chain].reshape(per_chain, size, M).mean(axis=1).ravel()
    mean = float(v.mean())
    if blocks.size < 2:
        return mean, float("nan")
    return mean, float(blocks.std(ddof=1) / math.sqrt(blocks.size))


def lil_envelope(N):
    """sqrt(log log N / N), the almost-sure fluctuation scale of averages."""
    N = np.asarray(N, dtype=float)
    return np.sqrt(np.log(np.log(N)) / N)


def chain_layout(N: int, n_chains: Optional[int] = None):
    """(chains, steps per chain) with chains * steps >= N."""
    if n_chains is None:
        n_chains = math.ceil(math.sqrt(N))
    n_chains = max(1, min(int(n_chains), N))
    return n_chains, math.ceil(N / n_chains)


def ensemble_starts(seed, n_chains: int):
    rng = np.random.default_rng(seed)
    return rng.random((n_chains, 2))


def run_chains(model, starts, n_steps: int):
    """Forward orbits of all starts, shape (n_steps + 1, chains, 2)."""
    return evolve_orbit(model, starts, n_steps, "forward").points


def _evaluate(g, points):
    out = g(points)
    if isinstance(out, tuple):
        return np.asarray(out[0], dtype=float), int(out[1])
    return np.broadcast_to(np.asarray(out, dtype=float), points.shape[:-1]), 0


def _blocks_stats(block_sums, size, total, count):
    blocks = (block_sums / size).ravel()
    mean = float(total / count)
    if blocks.size < 2:
        return mean, float("nan")
    return mean, float(blocks.std(ddof=1) / math.sqrt(blocks.size))


def mc_integrate(model, g: Callable, N: int, seed=None, burn_in=0,
                 n_chains: Optional[int] = None, n_batches: Optional[int] = None,
                 history: bool = False) -> MonteCarloEstimate:
    """Orbit average of g over N samples taken after ``burn_in`` steps.

    By default g is a pointwise function and the chains are streamed
    without storing the orbit.  With ``history=True`` g receives the whole
    array of chain orbits (time, chain, 2) and returns per-point values, or
    a pair (values, first valid index) for integrands that need a backward
    window; ``burn_in`` is raised to that index.
    """
    if N < 1:
        raise ValueError("N must be positive")
    chains, steps = chain_layout(N, n_chains)
    starts = ensemble_starts(seed, chains)
    if history:
        pts = run_chains(model, starts, burn_in + steps - 1)
        vals, valid = _evaluate(g, pts)
        if valid > burn_in:
            more = run_chains(model, pts[-1], valid - burn_in)[1:]
            pts = np.concatenate([pts, more])
            vals, valid = _evaluate(g, pts)
        start = max(burn_in, valid)
        sample = vals[start:start + steps]
        mean, err = batch_means(sample, n_batches)
        return MonteCarloEstimate(mean, err, int(sample.size), seed,
                                  n_batches or math.ceil(math.sqrt(sample.size)))

    nb = n_batches or math.ceil(math.sqrt(chains * steps))
    per_chain = max(1, min(steps, round(nb / chains)))
    size = steps // per_chain
    block = np.zeros((per_chain, chains))
    total = 0.0
    p = starts
    for _ in range(burn_in):
        p = model.forward(p)
    for k in range(steps):
        v = np.broadcast_to(np.asarray(g(p), dtype=float), (chains,))
        total += float(v.sum())
        b = k // size
        if b < per_chain:
            block[b] += v
        if k + 1 < steps:
            p = model.forward(p)
    mean, err = _blocks_stats(block, size, total, chains * steps)
    return MonteCarloEstimate(mean, err, chains * steps, seed, block.size)


# -- deterministic curve quadrature ------------------------------------------

def bump(u):
    """exp(-1/(1-u^2)) on (-1, 1), zero outside."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


_BUMP_MASS = integrate.quad(lambda u: math.exp(-1.0 / (1.0 - u * u)), -1, 1,
                            epsabs=0, epsrel=1e-12, limit=200)[0]


@dataclass
class CurveQuadratureSpec:
    """Straight segment base + s * direction, s in [-length/2, length/2]."""

    base: tuple
    direction: tuple
    n_push: int
    n_nodes: int
    length: float = 0.05
    pad: float = 0.1
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        self.direction = tuple(d / np.linalg.norm(d))
        if self.n_nodes < 3:
            raise ValueError("need at least 3 nodes")
        if not 0 <= self.pad < 0.5:
            raise ValueError("pad must be in [0, 0.5)")

    def arclength(self):
        return np.linspace(-self.length / 2, self.length / 2, self.n_nodes)

    def density(self, s):
        """Unit-mass bump on the inner (1 - 2 pad) part of the segment."""
        half = (0.5 - self.pad) * self.length
        return bump(np.asarray(s) / half) / (_BUMP_MASS * half)

    def weights(self):
        """Trapezoid weights times density, renormalised to sum 1."""
        s = self.arclength()
        w = np.full(s.shape, s[1] - s[0])
        w[[0, -1]] *= 0.5
        w = w * self.density(s)
        return w / w.sum()

    def mass_error(self) -> float:
        s = self.arclength()
        return abs(float(np.trapezoid(self.density(s), s)) - 1.0)

    def base_points(self):
        s = self.arclength()
        return wrap(np.asarray(self.base) + s[:, None] * np.asarray(self.direction))

    def pushed(self, model):
        """Node images after n_push steps and the pushed unit tangent growth."""
        key = (id(model), self.n_push)
        if key not in self._cache:
            pts = self.base_points()
            tangent = np.broadcast_to(np.asarray(self.direction), pts.shape).copy()
            growth = np.ones(self.n_nodes)
            rates = []
            for _ in range(self.n_push):
                tangent = matvec(model.jacobian(pts), tangent)
                pts = model.forward(pts)
                norm = np.linalg.norm(tangent, axis=-1)
                rates.append(float(np.max(norm)))
                growth *= norm
                tangent /= norm[:, None]
            self._cache[key] = (pts, growth, rates)
        return self._cache[key]


@dataclass
class CurveEstimate:
    value: float
    n_push: int
    n_nodes: int
    kappa: float
    eta: float
    alpha: float
    spacing_term: float
    mixing_term: float
    balanced_n: float

    @property
    def error_model(self) -> float:
        return self.spacing_term + self.mixing_term


def balanced_push(n_nodes, kappa, eta, alpha=1.0, length=0.05) -> float:
    """n at which (length * kappa^n / N)^alpha equals eta^n."""
    return alpha * math.log(n_nodes / length) / math.log(kappa ** alpha / eta)


def curve_integrate(model, g: Callable, spec: CurveQuadratureSpec, eta=None,
                    alpha=1.0, strict=False) -> CurveEstimate:
    """Weighted Riemann sum of g over the segment pushed n_push times.

    The error model is (length kappa^n / N)^alpha + eta^n with kappa the
    largest measured one-step stretch of the curve; eta defaults to the
    reciprocal of kappa squared when not supplied.  When the pushed node
    spacing reaches the torus period the sum is meaningless:
    NodeBudgetExceeded is raised with ``strict`` and a warning is issued
    otherwise.  A warning is also issued when n_push is far from the
    balanced value.
    """
    pts, growth, rates = spec.pushed(model)
    w = spec.weights()
    value = float(np.sum(w * g(pts)))
    if rates:
        kappa = max(rates)
    else:
        probe = matvec(model.jacobian(spec.base_points()), np.asarray(spec.direction))
        kappa = float(np.max(np.linalg.norm(probe, axis=-1)))
    if eta is None:
        eta = 1.0 / kappa ** 2
    n = spec.n_push
    spacing = (spec.length * kappa ** n / spec.n_nodes) ** alpha
    mixing = eta ** n
    n_star = balanced_push(spec.n_nodes, kappa, eta, alpha, spec.length) \
        if kappa ** alpha > eta else float("inf")
    est = CurveEstimate(value, n, spec.n_nodes, kappa, eta, alpha, spacing,
                        mixing, n_star)
    if spacing >= 1.0:
        msg = (f"{spec.n_nodes} nodes pushed {n} times are spaced "
               f"{spacing:.3g} apart; balanced push count is {n_star:.1f}")
        if strict:
            raise NodeBudgetExceeded(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    elif abs(n - n_star) > max(3.0, 0.5 * n_star):
        warnings.warn(f"n_push={n} is far from the balanced value {n_star:.1f}",
                      RuntimeWarning, stacklevel=2)
    return est


def trapezoid_reference(g, spec: CurveQuadratureSpec) -> float:
    """Plain trapezoid of g * density over the unpushed segment."""
    s = spec.arclength()
    vals = g(spec.base_points()) * spec.density(s)
    return float(np.trapezoid(vals, s) / np.trapezoid(spec.density(s), s))


# -- correlation series -------------------------------------------------------

@dataclass
class CorrelationSeries:
    terms: np.ndarray
    stderr: np.ndarray
    total: float
    total_stderr: float
    n_samples: int

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("# spacesplit correlation-series v1\n")
            fh.write("k,term,stderr\n")
            for k, (t, e) in enumerate(zip(self.terms, self.stderr)):
                fh.write(f"{k},{t!r},{e!r}\n")


def correlation_series(rho, fvals, L: int, start=0, stop=None,
                       n_batches: Optional[int] = None) -> CorrelationSeries:
    """term k = average over i in [start, stop) of rho[i] * f[i + k].

    All terms share one set of samples; ``stop`` defaults to the last index
    for which f[i + L - 1] exists.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    T = rho.shape[0]
    stop = T - L + 1 if stop is None else stop
    if stop > T - L + 1 or stop <= start:
        raise ValueError("orbit too short for the requested series length")
    r = rho[start:stop]
    terms, errs = np.empty(L), np.empty(L)
    summed = np.zeros_like(r)
    for k in range(L):
        prod = r * fvals[start + k:stop + k]
        summed += prod
        terms[k], errs[k] = batch_means(prod, n_batches)
    total, total_err = batch_means(summed, n_batches)
    return CorrelationSeries(terms, errs, total, total_err, int(r.size))


def fit_log_decay(terms, stderr=None):
    """Least-squares slope of log|term_k| against k with its p-value."""
    from scipy import stats

    terms = np.abs(np.asarray(terms, dtype=float))
    k = np.arange(len(terms))
    keep = terms > 0
    res = stats.linregress(k[keep], np.log(terms[keep]))
    return float(res.slope), float(res.pvalue)
