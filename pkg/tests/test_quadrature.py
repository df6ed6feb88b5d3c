import math
import warnings

import numpy as np
import pytest

from spacesplit.errors import NodeBudgetExceeded
from spacesplit.quadrature import (CurveQuadratureSpec, batch_means, chain_layout,
                                   correlation_series, curve_integrate, fit_log_decay,
                                   lil_envelope, mc_integrate, trapezoid_reference)

from conftest import unstable_eigvec


def cos2(p):
    return np.cos(2 * np.pi * p[..., 0]) ** 2


def test_constant_integrand_is_exact(cat):
    est = mc_integrate(cat, lambda p: np.full(p.shape[:-1], 2.5), 10_000, seed=1)
    assert est.mean == 2.5
    assert est.stderr == 0.0


def test_cos_mean_zero(cat, cosx):
    est = mc_integrate(cat, cosx, 40_000, seed=2, burn_in=10)
    assert abs(est.mean) <= 3 * est.stderr + 1e-12


def test_cos_squared_is_half(cat):
    est = mc_integrate(cat, cos2, 40_000, seed=3, burn_in=10)
    assert abs(est.mean - 0.5) <= 3 * est.stderr


def test_same_seed_same_result(cat):
    a = mc_integrate(cat, cos2, 5_000, seed=11)
    b = mc_integrate(cat, cos2, 5_000, seed=11)
    assert a.mean == b.mean and a.stderr == b.stderr


def test_linear_in_integrand(cat, cosx):
    a = mc_integrate(cat, cosx, 5_000, seed=5).mean
    b = mc_integrate(cat, cos2, 5_000, seed=5).mean
    c = mc_integrate(cat, lambda p: 2 * cosx(p) - 3 * cos2(p), 5_000, seed=5).mean
    assert c == pytest.approx(2 * a - 3 * b, abs=1e-12)


def test_history_mode_matches_streaming(cat):
    a = mc_integrate(cat, cos2, 4_900, seed=8, burn_in=5)
    b = mc_integrate(cat, cos2, 4_900, seed=8, burn_in=5, history=True)
    assert a.mean == pytest.approx(b.mean, abs=1e-13)
    assert a.N == b.N


def test_history_mode_honours_valid_index(cat):
    seen = {}

    def g(pts):
        seen["T"] = pts.shape[0]
        return cos2(pts), 30

    est = mc_integrate(cat, g, 900, seed=1, history=True)
    assert est.N == 900
    assert seen["T"] >= 30 + 30


def test_chain_layout_covers_N():
    for N in (1000, 12345, 10 ** 6):
        c, s = chain_layout(N)
        assert c * s >= N and c == math.ceil(math.sqrt(N))


def test_batch_means_iid_stderr():
    x = np.random.default_rng(0).normal(size=(10_000, 10))
    mean, err = batch_means(x)
    assert err == pytest.approx(1 / math.sqrt(x.size), rel=0.2)


def test_error_shrinks_like_lil(cat, cosx):
    Ns = [10 ** 3, 10 ** 4, 10 ** 5]
    errs = [mc_integrate(cat, cosx, N, seed=21, burn_in=10).stderr for N in Ns]
    ratio = np.array(errs) / lil_envelope(Ns)
    assert ratio.max() / ratio.min() < 3


# curve quadrature

def _spec(n_push, n_nodes=100_000, base=(0.3, 0.7)):
    return CurveQuadratureSpec(base, tuple(unstable_eigvec()), n_push, n_nodes)


def test_curve_constant_exact(cat):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = curve_integrate(cat, lambda p: np.full(p.shape[:-1], 3.0), _spec(4))
    assert est.value == pytest.approx(3.0, abs=1e-14)


def test_curve_mass_error_small():
    assert _spec(0).mass_error() < 1e-10


def test_curve_zero_push_matches_trapezoid(cat):
    spec = _spec(0, n_nodes=20_001)
    g = lambda p: np.sin(2 * np.pi * p[..., 0]) * np.cos(2 * np.pi * p[..., 1])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = curve_integrate(cat, g, spec)
    assert est.value == pytest.approx(trapezoid_reference(g, spec), abs=1e-10)


def test_curve_pushed_mean(cat):
    with pytest.warns(RuntimeWarning, match="far from the balanced"):
        est = curve_integrate(cat, cos2, _spec(12))
    assert abs(est.value - 0.5) < 1e-2
    assert est.kappa == pytest.approx((3 + math.sqrt(5)) / 2, rel=1e-9)


def test_node_budget_strict(cat):
    with pytest.raises(NodeBudgetExceeded):
        curve_integrate(cat, cos2, _spec(40, n_nodes=1000), strict=True)
    with pytest.warns(RuntimeWarning):
        curve_integrate(cat, cos2, _spec(40, n_nodes=1000))


def test_bad_spec_rejected():
    with pytest.raises(ValueError):
        CurveQuadratureSpec((0, 0), (1, 0), 1, 2)


# correlation series

def test_series_with_zero_density():
    rho = np.zeros((200, 4))
    s = correlation_series(rho, np.ones((200, 4)), 5)
    assert np.all(s.terms == 0) and s.total == 0


def test_series_with_constant_f():
    rng = np.random.default_rng(0)
    rho = rng.normal(size=(300, 6))
    s = correlation_series(rho, np.full((300, 6), 2.0), 4)
    stop = 300 - 4 + 1
    assert s.terms[0] == pytest.approx(2 * rho[:stop].mean())
    assert s.total == pytest.approx(4 * s.terms[0])


def test_series_too_short():
    with pytest.raises(ValueError):
        correlation_series(np.zeros((5, 1)), np.zeros((5, 1)), 10)


def test_fit_log_decay():
    terms = 0.7 * 0.5 ** np.arange(12) * (-1) ** np.arange(12)
    slope, p = fit_log_decay(terms)
    assert slope == pytest.approx(math.log(0.5))
    assert p < 1e-10


def test_series_csv(tmp_path):
    s = correlation_series(np.ones((20, 2)), np.ones((20, 2)), 3)
    path = tmp_path / "c.csv"
    s.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[:2] == ["# spacesplit correlation-series v1", "k,term,stderr"]
    assert len(lines) == 5
