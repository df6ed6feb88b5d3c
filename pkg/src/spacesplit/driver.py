"""End-to-end sensitivity estimate, finite-difference oracle and validation.

The response of mu_t(f) to the family T_t = T + t X o T is estimated as

    psi = mu(V f) + sum_{k < L} mu(rho . f o T^k)

where X = a Xu + V - T_*V and rho = a rho0 - Xu a.  Every quantity at a
sample point is computed from the orbit history preceding it: the first
n_o1 points give Xu and the cocycle scalars, the next windows give V and
its unstable derivative, then rho0.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .cocycle import build_frame, h_growth_rate, unstable_at
from .config import S3Config
from .density import compute_density
from .expressions import field_from_expressions, observable_from_expression
from .neumann import jet_decompose
from .quadrature import (CurveQuadratureSpec, chain_layout, curve_integrate,
                         ensemble_starts, fit_log_decay, mc_integrate, run_chains)
from .torus import (MapModel, Observable, VectorField, cat_map, dot,
                    evolve_orbit, matvec, perturbed_map, pushforward_field)


# -- model construction -------------------------------------------------------

def build_model(cfg: S3Config) -> MapModel:
    base = cat_map(cfg.map.matrix)
    if cfg.map.family == "cat":
        model = base
    else:
        pert = field_from_expressions(cfg.map.perturbation, name="X_map")
        model = perturbed_map(base, cfg.map.t, pert, name="perturbed_cat")
    if cfg.map.hessian == "fd":
        model = model.with_fd_hessian()
    return model


def build_field(cfg: S3Config) -> VectorField:
    return field_from_expressions(cfg.field.X, name="X")


def build_observable(cfg: S3Config) -> Observable:
    return observable_from_expression(cfg.observable.f, name="f")


def coboundary_field(model: MapModel, V0: VectorField) -> VectorField:
    """X = V0 - T_* V0."""
    TV = pushforward_field(model, V0)

    def value(p):
        return V0(p) - TV(p)

    def jac(p):
        return V0.jacobian(p) - TV.jacobian(p)

    return VectorField(value, jac, name=f"{V0.name}-T_*{V0.name}")


# -- windows ------------------------------------------------------------------

@dataclass(frozen=True)
class WindowPlan:
    n_o1: int
    n_curvature: int
    n_v: int
    n_rho: int
    L: int

    @classmethod
    def from_config(cls, cfg: S3Config, L: Optional[int] = None) -> "WindowPlan":
        w = cfg.windows
        N = w.neumann_n
        return cls(w.n_o1, min(N, w.n_o1), min(N, w.n_o2), min(N, w.n_o3),
                   L or w.series_length)

    @property
    def start(self) -> int:
        """First orbit index at which every window is complete."""
        return self.n_o1 + self.n_curvature + max(self.n_v, self.n_rho)


def window_warnings(plan: WindowPlan, N: int, eta: float):
    """Windows shorter than 3 log10 N / |log10 eta| are flagged."""
    if not (0 < eta < 1):
        return [f"measured contraction {eta:.3g} is not below 1"]
    need = 3 * math.log10(max(N, 10)) / abs(math.log10(eta))
    out = []
    for name, n in (("n_o1", plan.n_o1), ("n_o2", plan.n_v), ("n_o3", plan.n_rho)):
        if n < need:
            out.append(f"{name}={n} is shorter than the suggested {need:.1f} "
                       f"for N={N} at contraction {eta:.3f}")
    return out


# -- per-chunk evaluation -----------------------------------------------------

@dataclass
class ChunkResult:
    """Per-column averages over the sample indices of one chunk."""

    vf: np.ndarray               # (M,)
    terms: np.ndarray            # (L, M)
    rho: np.ndarray              # (M,)
    adjoint: Optional[np.ndarray]  # (3, M): lhs, rhs, lhs - rhs
    diagnostics: dict
    export: Optional[dict] = None


def _max(a, b):
    if a is None or (isinstance(a, float) and math.isnan(a)):
        return b
    if b is None or (isinstance(b, float) and math.isnan(b)):
        return a
    return max(a, b)


def evaluate_orbits(model, pts, X, f, plan: WindowPlan, n_samples: int,
                    derivative="auto", fd_step=1e-5, g: Optional[Observable] = None,
                    export=False) -> ChunkResult:
    """Run the full pipeline on forward-ordered orbits ``pts`` (T, M, 2).

    Samples are the indices plan.start .. plan.start + n_samples - 1 of
    every column; f is read up to L - 1 steps beyond the last sample.
    """
    frame = build_frame(model, pts, plan.n_o1, plan.n_curvature)
    split = jet_decompose(frame, X, plan.n_v, derivative, fd_step)
    dens = compute_density(frame, split, plan.n_rho)
    s0 = plan.start
    if dens.valid_from > s0:
        raise RuntimeError(f"windows valid from {dens.valid_from}, planned {s0}")
    s1 = s0 + n_samples
    if pts.shape[0] < s1 + plan.L - 1:
        raise ValueError("orbit too short for the requested samples")

    P = pts[s0:s1]
    fv = f(pts[s0:s1 + plan.L - 1])
    grad = f.gradient(P)
    V = split.V[s0:s1]
    rho = dens.rho[s0:s1]
    vf = dot(V, grad).mean(axis=0)
    terms = np.stack([(rho * fv[k:k + n_samples]).mean(axis=0)
                      for k in range(plan.L)])
    adjoint = None
    if g is not None:
        Y = split.Y[s0:s1]
        gv = g(P)
        lhs = dot(grad, Y) * gv
        rhs = fv[:n_samples] * (-dot(g.gradient(P), Y) + rho * gv)
        adjoint = np.stack([lhs.mean(0), rhs.mean(0), (lhs - rhs).mean(0)])

    v = frame.valid_from
    diag = {
        "decomposition_residual": float(np.max(split.residual[split.valid_from:])),
        "curvature_residual": frame.diagnostics["curvature_residual"],
        "rho0_residual": dens.rho0_residual,
        "unstable_norm_error": float(np.max(np.abs(
            np.linalg.norm(frame.Xu[v:], axis=-1) - 1.0))),
        "curvature_orthogonality": float(np.max(np.abs(
            dot(frame.curvature[v:], frame.Xu[v:])))),
        "decomposition_contraction": split.diagnostics["lift_contraction"],
        "jet_contraction": split.diagnostics["jet_lift_contraction"],
        "curvature_contraction": frame.diagnostics["curvature_lift_contraction"],
        "rho0_contraction": dens.diagnostics["rho0_contraction"],
        "h_growth_rate_50": h_growth_rate(frame.h[1:], 50, frame.valid["h"] - 1)
        if pts.shape[0] - frame.valid["h"] >= 50 else float("nan"),
        "jet_value_matches": bool(split.diagnostics["jet_value_matches"]),
    }
    ex = None
    if export:
        c = 0
        ex = {
            "k": np.arange(s0, s1),
            "points": P[:, c], "Xu": frame.Xu[s0:s1, c], "h": frame.h[s0:s1, c],
            "curvature": frame.curvature[s0:s1, c], "Xu_h": frame.Xu_h[s0:s1, c],
            "V": V[:, c], "a": split.a[s0:s1, c], "rho0": dens.rho0[s0:s1, c],
            "rho": rho[:, c],
        }
    return ChunkResult(vf, terms, rho.mean(axis=0), adjoint, diag, ex)


def _merge_diagnostics(results):
    out = {}
    for r in results:
        for k, v in r.diagnostics.items():
            if isinstance(v, bool):
                out[k] = out.get(k, True) and v
            else:
                out[k] = _max(out.get(k), v)
    return out


def _mean_err(cols, weights=None):
    cols = np.asarray(cols, dtype=float)
    if weights is not None:
        return float(np.sum(weights * cols)), float("nan")
    mean = float(cols.mean())
    if cols.size < 2:
        return mean, float("nan")
    return mean, float(cols.std(ddof=1) / math.sqrt(cols.size))


# -- report -------------------------------------------------------------------

@dataclass
class SensitivityReport:
    psi_total: float
    psi_stderr: float
    coboundary_term: float
    coboundary_stderr: float
    unstable_terms: list
    unstable_stderr: list
    series_total: float
    series_stderr: float
    rho_mean: float
    rho_stderr: float
    n_samples: int
    method: str
    seed: int
    adjoint: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    export: Optional[dict] = field(default=None, repr=False)

    def identity_holds(self) -> bool:
        return self.psi_total == self.coboundary_term + math.fsum(self.unstable_terms)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("export")
        return d

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(_jsonable(self.to_dict()), fh, indent=2)

    def write_terms_csv(self, path):
        with open(path, "w") as fh:
            fh.write("# spacesplit unstable-terms v1\n")
            fh.write("k,term,stderr\n")
            for k, (t, e) in enumerate(zip(self.unstable_terms, self.unstable_stderr)):
                fh.write(f"{k},{t!r},{e!r}\n")

    def write_frame_csv(self, path):
        """Per-point frame and density values along one sample chain."""
        ex = self.export
        if ex is None:
            raise ValueError("report was produced without export data")
        with open(path, "w") as fh:
            fh.write("# spacesplit frame v1\n")
            fh.write("k,x,y,Xu_x,Xu_y,h,curv_x,curv_y,Xu_h,V_x,V_y,a,rho0,rho\n")
            for i, k in enumerate(ex["k"]):
                row = [*ex["points"][i], *ex["Xu"][i], ex["h"][i], *ex["curvature"][i],
                       ex["Xu_h"][i], *ex["V"][i], ex["a"][i], ex["rho0"][i], ex["rho"][i]]
                fh.write(f"{k}," + ",".join(repr(float(v)) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def provenance(cfg: S3Config) -> dict:
    import scipy

    return {"config": cfg.to_dict(), "version": __version__,
            "numpy": np.__version__, "scipy": scipy.__version__}


# -- orchestration ------------------------------------------------------------

def _map_chunks(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_s3(cfg: S3Config, model: Optional[MapModel] = None,
           X: Optional[VectorField] = None, f: Optional[Observable] = None,
           g: Optional[Observable] = None, threads=1, L: Optional[int] = None,
           n_samples: Optional[int] = None, export=True) -> SensitivityReport:
    """Estimate psi = d/dt mu_t(f) for the family T + t X o T at t = 0."""
    t0 = time.perf_counter()
    model = model or build_model(cfg)
    X = X or build_field(cfg)
    f = f or build_observable(cfg)
    plan = WindowPlan.from_config(cfg, L)
    q = cfg.quadrature
    N = n_samples or q.n_samples
    kw = dict(derivative=cfg.field.derivative, fd_step=cfg.field.fd_step, g=g)

    if q.method == "probabilistic":
        chains, steps = chain_layout(N, q.n_chains)
        if chains < 2:
            raise ValueError("need at least two chains for error bars")
        starts = ensemble_starts(cfg.seed, chains)
        length = plan.start + steps + plan.L - 2
        groups = [starts[i:i + q.chunk_chains] for i in range(0, chains, q.chunk_chains)]

        def work(item):
            idx, s = item
            pts = run_chains(model, s, length)
            return evaluate_orbits(model, pts, X, f, plan, steps,
                                   export=export and idx == 0, **kw)

        results = _map_chunks(work, list(enumerate(groups)), threads)
        weights = None
        extra = {"n_chains": chains, "steps_per_chain": steps}
    else:
        spec, weights, base_dir = _curve_spec(cfg, model)
        nodes = spec.pushed(model)[0]
        groups = [np.arange(i, min(i + q.chunk_chains * 10, len(nodes)))
                  for i in range(0, len(nodes), q.chunk_chains * 10)]

        def work(item):
            idx, sel = item
            pts = history_orbits(model, nodes[sel], plan.start, plan.L - 1)
            return evaluate_orbits(model, pts, X, f, plan, 1,
                                   export=False, **kw)

        results = _map_chunks(work, list(enumerate(groups)), threads)
        est = curve_integrate(model, f, spec)
        extra = {"n_nodes": spec.n_nodes, "n_push": spec.n_push,
                 "curve_direction": list(base_dir), "error_model": est.error_model,
                 "kappa": est.kappa, "balanced_n_push": est.balanced_n}
        steps = 1

    vf = np.concatenate([r.vf for r in results])
    terms = np.concatenate([r.terms for r in results], axis=1)
    rho = np.concatenate([r.rho for r in results])
    totals = vf + terms.sum(axis=0)

    cob, cob_err = _mean_err(vf, weights)
    term_stats = [_mean_err(t, weights) for t in terms]
    series, series_err = _mean_err(terms.sum(axis=0), weights)
    _, psi_err = _mean_err(totals, weights)
    rho_mean, rho_err = _mean_err(rho, weights)
    unstable = [t for t, _ in term_stats]
    unstable_err = [e for _, e in term_stats]
    if weights is not None:
        # deterministic sums: error model scaled by the integrand size
        scale = extra["error_model"]
        cob_err = scale * float(np.max(np.abs(vf)))
        unstable_err = [scale * float(np.max(np.abs(t))) for t in terms]
        series_err = scale * float(np.max(np.abs(terms.sum(axis=0))))
        psi_err = scale * float(np.max(np.abs(totals)))
        rho_err = scale * float(np.max(np.abs(rho)))

    adjoint = None
    if g is not None:
        adj = np.concatenate([r.adjoint for r in results], axis=1)
        (lm, le), (rm, re_), (dm, de) = (_mean_err(a, weights) for a in adj)
        adjoint = {"lhs": lm, "lhs_stderr": le, "rhs": rm, "rhs_stderr": re_,
                   "difference": dm, "difference_stderr": de}

    diag = _merge_diagnostics(results)
    diag.update(extra)
    diag["window_start"] = plan.start
    diag["elapsed_seconds"] = time.perf_counter() - t0
    warn = window_warnings(plan, vf.size * steps, diag["decomposition_contraction"])
    report = SensitivityReport(
        psi_total=cob + math.fsum(unstable),
        psi_stderr=psi_err, coboundary_term=cob, coboundary_stderr=cob_err,
        unstable_terms=unstable, unstable_stderr=unstable_err,
        series_total=series, series_stderr=series_err,
        rho_mean=rho_mean, rho_stderr=rho_err, n_samples=int(vf.size * steps),
        method=q.method, seed=cfg.seed, adjoint=adjoint, diagnostics=diag,
        warnings=warn, provenance=provenance(cfg),
        export=results[0].export if results else None)
    return report


def history_orbits(model: MapModel, points, back: int, ahead: int):
    """Forward-ordered orbits with ``back`` preimages and ``ahead`` images.

    The given points sit at index ``back`` of the returned (back+ahead+1, M, 2)
    array.
    """
    past = evolve_orbit(model, points, back, "backward").forward_order()
    if ahead < 1:
        return past
    future = evolve_orbit(model, points, ahead, "forward").points[1:]
    return np.concatenate([past, future])


def _curve_spec(cfg: S3Config, model: MapModel):
    q = cfg.quadrature
    rng = np.random.default_rng(cfg.seed)
    base = rng.random(2)
    direction = unstable_at(model, base, cfg.windows.n_o1)
    spec = CurveQuadratureSpec(tuple(base), tuple(direction), q.n_push, q.n_nodes,
                               q.curve_length)
    return spec, spec.weights(), direction


# -- finite-difference oracle -------------------------------------------------

@dataclass
class FDOracleResult:
    t_step: float
    estimate: float
    stderr: float
    plus_mean: float
    plus_stderr: float
    minus_mean: float
    minus_stderr: float
    seeds: list
    per_seed: list
    orbit_length: int
    bias_note: str = ("finite t carries an O(t) bias from the unspecified O(t^2) "
                      "part of the family plus the O(t^2) central-difference "
                      "truncation; neither is corrected")
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(_jsonable(self.to_dict()), fh, indent=2)


def oracle_seeds(seed: int, n: int):
    ss = np.random.SeedSequence(seed).spawn(n)
    return [int(s.generate_state(1, dtype=np.uint32)[0]) for s in ss]


def fd_oracle(cfg: S3Config, t_step=None, orbit_length=None, n_seeds=None,
              model=None, X=None, f=None, threads=1) -> FDOracleResult:
    """Central difference (<f>_{+t} - <f>_{-t}) / 2t of orbit averages.

    Both signs reuse the same seeds and burn-in.  The error bar combines the
    per-seed batch-means errors of the two sides.
    """
    o = cfg.oracle
    t = float(t_step if t_step is not None else o.t_step)
    N = int(orbit_length or o.orbit_length)
    n = int(n_seeds or o.n_seeds)
    base = model or build_model(cfg)
    X = X or build_field(cfg)
    f = f or build_observable(cfg)
    plus = perturbed_map(base, t, X, name="T+")
    minus = perturbed_map(base, -t, X, name="T-")
    seeds = oracle_seeds(cfg.seed, n)
    jobs = [(m, s) for s in seeds for m in (plus, minus)]

    def work(job):
        m, s = job
        return mc_integrate(m, f, N, seed=s, burn_in=o.burn_in)

    est = _map_chunks(work, jobs, threads)
    p, mn = est[0::2], est[1::2]
    pm = float(np.mean([e.mean for e in p]))
    mm = float(np.mean([e.mean for e in mn]))
    pe = math.sqrt(sum(e.stderr ** 2 for e in p)) / n
    me = math.sqrt(sum(e.stderr ** 2 for e in mn)) / n
    per_seed = [(a.mean - b.mean) / (2 * t) for a, b in zip(p, mn)]
    return FDOracleResult(
        t_step=t, estimate=(pm - mm) / (2 * t),
        stderr=math.sqrt(pe ** 2 + me ** 2) / (2 * t),
        plus_mean=pm, plus_stderr=pe, minus_mean=mm, minus_stderr=me,
        seeds=seeds, per_seed=per_seed, orbit_length=int(p[0].N),
        provenance=provenance(cfg))


# -- structural checks --------------------------------------------------------

def is_area_preserving(model: MapModel, n=256, seed=0, tol=1e-10) -> bool:
    p = np.random.default_rng(seed).random((n, 2))
    return bool(np.max(np.abs(np.linalg.det(model.jacobian(p)) - 1.0)) < tol)


@dataclass
class PartialSums:
    sums: np.ndarray
    stderr: np.ndarray
    target: float
    target_stderr: float
    method: str


def coboundary_partial_sums(model: MapModel, V0: VectorField, f: Observable,
                            n_terms: int, N: int, seed: int,
                            n_chains: Optional[int] = None) -> PartialSums:
    """S_n = sum_{m < n} mu((V0 - T_*V0)(f o T^m)) for n = 1..n_terms.

    For area-preserving maps the invariant measure is Lebesgue and each
    term is -mu(f o T^m div(V0 - T_*V0)); otherwise the tangent vector is
    pushed forward explicitly, whose variance grows with m.
    """
    Xc = coboundary_field(model, V0)
    chains, steps = chain_layout(N, n_chains)
    pts = run_chains(model, ensemble_starts(seed, chains), steps + n_terms - 1)
    base = pts[:steps]
    fv = f(pts)
    if is_area_preserving(model):
        method = "divergence"
        div = Xc.divergence(base)
        per = np.stack([-(fv[m:m + steps] * div).mean(axis=0) for m in range(n_terms)])
    else:
        method = "tangent"
        w = Xc(base)
        per = []
        for m in range(n_terms):
            per.append(dot(w, f.gradient(pts[m:m + steps])).mean(axis=0))
            w = matvec(model.jacobian(pts[m:m + steps]), w)
        per = np.stack(per)
    sums = np.cumsum(per, axis=0)
    err = sums.std(axis=1, ddof=1) / math.sqrt(chains)
    target_cols = dot(V0(base), f.gradient(base)).mean(axis=0)
    t, te = _mean_err(target_cols)
    return PartialSums(sums.mean(axis=1), err, t, te, method)


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


@dataclass
class ValidationResult:
    checks: list
    passed: bool
    provenance: dict = field(default_factory=dict)

    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self):
        return {"passed": self.passed, "failed": self.failed(),
                "checks": [asdict(c) for c in self.checks],
                "provenance": self.provenance}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(_jsonable(self.to_dict()), fh, indent=2)


def _within(name, diff, err, sigmas, detail=""):
    ok = bool(np.isfinite(err) and abs(diff) <= sigmas * err)
    return Check(name, ok, float(abs(diff)), float(sigmas * err), detail)


def validate(cfg: S3Config, threads=1, n_samples: Optional[int] = None) -> ValidationResult:
    """Structural identity checks on the configured map, field and observable."""
    v = cfg.validate
    tol, k = v.tolerance, v.sigmas
    N = n_samples or v.n_samples
    model = build_model(cfg)
    f = build_observable(cfg)
    g = observable_from_expression(v.g, name="g")
    L = max(cfg.windows.series_length, v.decay_terms)
    checks = []

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = run_s3(cfg, model=model, f=f, g=g, threads=threads, L=L,
                     n_samples=N, export=False)
    d = rep.diagnostics
    for name in ("decomposition_residual", "curvature_residual", "rho0_residual"):
        val = d[name]
        checks.append(Check(name, bool(val <= tol), val, tol))
    for name in ("unstable_norm_error", "curvature_orthogonality"):
        val = d[name]
        checks.append(Check(name, bool(val <= max(tol, 1e-10)), val, max(tol, 1e-10)))
    checks.append(Check("jet_value_consistency", d["jet_value_matches"],
                        float(d["jet_value_matches"]), 1.0))
    a = rep.adjoint
    checks.append(_within("adjoint_identity", a["difference"], a["difference_stderr"], k,
                          f"lhs={a['lhs']:.6g} rhs={a['rhs']:.6g}"))
    checks.append(_within("rho_mean_zero", rep.rho_mean, rep.rho_stderr, k))

    terms = np.asarray(rep.unstable_terms[:v.decay_terms])
    errs = np.asarray(rep.unstable_stderr[:v.decay_terms])
    slope, p = fit_log_decay(terms)
    # too few terms above noise for a slope fit: accept a leading run of
    # resolved terms shrinking in size followed by noise only
    above = np.abs(terms) > k * errs
    resolved = int(np.sum(above[1:]))
    run = int(np.argmin(above)) if not above.all() else len(above)
    shrinking = bool(np.all(np.diff(np.abs(terms[:run])) < 0))
    tail_quiet = not above[run:].any()
    ok = bool((slope < 0 and p < v.decay_p_value) or (shrinking and tail_quiet))
    checks.append(Check("correlation_decay", ok, slope, 0.0,
                        f"p={p:.3g} resolved_terms_after_k0={resolved} leading_run={run}"))

    V0 = field_from_expressions(v.coboundary, name="V0")
    Xc = coboundary_field(model, V0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tele = run_s3(cfg, model=model, X=Xc, f=f, threads=threads, n_samples=N,
                      export=False)
    ps = coboundary_partial_sums(model, V0, f, v.telescoping_terms, N, cfg.seed + 1)
    checks.append(_within("telescoping_s3", tele.psi_total - ps.target,
                          math.hypot(tele.psi_stderr, ps.target_stderr), k,
                          f"psi={tele.psi_total:.6g} target={ps.target:.6g}"))
    gap = np.abs(ps.sums - ps.target)
    bars = k * np.hypot(ps.stderr, ps.target_stderr)
    rising = int(np.sum(gap[1:] > gap[:-1] + bars[1:]))
    ok = bool(gap[-1] <= bars[-1] and rising == 0)
    checks.append(Check("telescoping_partial_sums", ok, float(gap[-1]), float(bars[-1]),
                        f"method={ps.method} significant_increases={rising}"))
    passed = all(c.passed for c in checks)
    return ValidationResult(checks, passed, provenance(cfg))
