import numpy as np
import pytest

from spacesplit.cocycle import build_frame
from spacesplit.errors import ContractionViolation, DerivativeUnavailable, WindowTooShort
from spacesplit.expressions import field_from_expressions
from spacesplit.neumann import (decompose_field, jet_decompose, lift_contraction,
                                neumann_solve, neumann_solve_jet, unstable_derivative)
from spacesplit.torus import VectorField, dot, linear_combination, zero_field

from conftest import LAMBDA_S, orbits


def test_zero_source_gives_zero():
    lift = np.random.default_rng(0).normal(size=(30, 2, 2)) * 0.3
    sol = neumann_solve(lift, np.zeros((30, 2)), 10)
    assert np.all(sol.v == 0)


def test_scalar_half_lift_geometric_series():
    # v - v o T^{-1} / 2 = w with w = 1 has v = sum 2^{-n} = 2
    T, n = 120, 60
    sol = neumann_solve(np.full(T, 0.5), np.ones(T), n)
    assert np.allclose(sol.v[n - 1:], 2.0, atol=1e-15 * 4 + 2.0 ** (1 - n))
    assert sol.sup_residual < 1e-15


def test_cat_lift_matches_dense_reference(cat_frame):
    fr = cat_frame
    lift = np.zeros_like(fr.jac)
    lift[1:] = fr.projector[1:] @ fr.jac[:-1]
    w = np.broadcast_to([0.3, -0.2], fr.Xu.shape).copy()
    n = 20
    sol = neumann_solve(lift, w, n, valid_from=fr.valid["Xu"])
    # brute force: sum over 2n explicit products at a single point
    i, c = 150, 2
    ref, prod = np.zeros(2), np.eye(2)
    for m in range(2 * n):
        ref += prod @ w[i - m, c]
        prod = prod @ lift[i - m, c]
    assert np.allclose(sol.v[i, c], ref, atol=1e-12)


def test_contraction_violation():
    lift = np.broadcast_to(2.0 * np.eye(2), (40, 2, 2))
    with pytest.raises(ContractionViolation):
        neumann_solve(lift, np.ones((40, 2)), 10, check_contraction=True)


def test_window_too_short(cat_frame, shear):
    with pytest.raises(WindowTooShort):
        decompose_field(cat_frame, shear, n=3, tol=1e-8)


def test_lift_contraction_scalar():
    assert lift_contraction(np.full(50, 0.25), 10, scalar=True) == pytest.approx(0.25)


def test_decompose_zero_field(cat_frame):
    s = jet_decompose(cat_frame, zero_field(), 40)
    for arr in (s.V, s.Y, s.a, s.dV, s.dY, s.Xu_a):
        assert np.all(arr == 0)


def test_decompose_unstable_multiple(pert_frame):
    fr = pert_frame
    # X = c(p) Xu(p) sampled along the orbit: feed the values directly
    c = np.cos(2 * np.pi * fr.points[..., 1])
    Xvals = c[..., None] * fr.Xu
    field = VectorField(lambda p: Xvals if p.shape == fr.points.shape else None)
    s = decompose_field(fr, field, 40)
    P_Y = s.Y - s.a[..., None] * fr.Xu
    assert np.max(np.linalg.norm(P_Y[s.valid_from:], axis=-1)) < 1e-8
    assert s.sup_residual < 1e-8


def test_cat_constant_field_closed_form(cat_frame):
    fr = cat_frame
    X = field_from_expressions(["0.1", "0"])
    s = decompose_field(fr, X, 40)
    A = np.array([[2.0, 1.0], [1.0, 1.0]])
    u = fr.Xu[fr.valid_from, 0]
    P = np.eye(2) - np.outer(u, u)
    ref = np.linalg.solve(np.eye(2) - P @ A, [0.1, 0.0])
    assert np.max(np.abs(s.V[s.valid_from:] - ref)) < 1e-10


def test_cat_constant_field_has_zero_jet(cat_frame):
    s = jet_decompose(cat_frame, field_from_expressions(["0.1", "-0.3"]), 40)
    assert np.max(np.abs(s.dV[s.jet_valid_from:])) < 1e-12
    assert np.max(np.abs(s.Xu_a[s.jet_valid_from:])) < 1e-12


def test_residual_decays_like_lift_contraction(pert_frame, shear):
    Ns = np.arange(2, 22, 2)
    res = np.array([decompose_field(pert_frame, shear, n).sup_residual for n in Ns])
    rate = np.exp(np.polyfit(Ns, np.log(res), 1)[0])
    eta = decompose_field(pert_frame, shear, 40).diagnostics["lift_contraction"]
    assert abs(rate / eta - 1) < 0.25
    assert decompose_field(pert_frame, shear, 40).sup_residual < 1e-8


def test_linearity(pert_frame):
    X1 = field_from_expressions(["0", "sin(2*pi*x)"])
    X2 = field_from_expressions(["cos(2*pi*y)", "0.2"])
    combo = linear_combination([(2.0, X1), (-0.5, X2)])
    s1, s2 = decompose_field(pert_frame, X1), decompose_field(pert_frame, X2)
    s = decompose_field(pert_frame, combo)
    v = s.valid_from
    assert np.max(np.abs(s.V[v:] - (2 * s1.V[v:] - 0.5 * s2.V[v:]))) < 1e-12


def test_jet_value_slot_is_bitwise(pert_frame, shear):
    s = jet_decompose(pert_frame, shear, 40)
    plain = decompose_field(pert_frame, shear, 40)
    assert np.array_equal(s.V, plain.V)
    assert s.diagnostics["jet_value_matches"]


def test_jet_solver_value_equals_plain_solver():
    rng = np.random.default_rng(1)
    lift = 0.3 * rng.normal(size=(50, 2, 2))
    w = rng.normal(size=(50, 2))
    v, _ = neumann_solve_jet(lift, lift, lift, w, w, 12)
    assert np.array_equal(v, neumann_solve(lift, w, 12).v)


def test_jet_matches_fd_along_unstable_line(pert, pert_frame, shear):
    from spacesplit.torus import evolve_orbit

    s = jet_decompose(pert_frame, shear, 40)
    i, c, eps = 250, 0, 1e-4
    p, u = pert_frame.points[i, c], pert_frame.Xu[i, c]

    def at(q):
        back = evolve_orbit(pert, q, 150, "backward").forward_order()[:, None, :]
        sp = decompose_field(build_frame(pert, back), shear, 40)
        return sp.V[-1, 0], sp.a[-1, 0]

    (vp, ap), (vm, am) = at(p + eps * u), at(p - eps * u)
    dV = (vp - vm) / (2 * eps)
    assert np.linalg.norm(s.dV[i, c] - dV) <= 1e-3 * np.linalg.norm(dV)
    assert s.Xu_a[i, c] == pytest.approx((ap - am) / (2 * eps), rel=1e-3)


def test_fd_derivative_mode(pert_frame, shear):
    a = unstable_derivative(pert_frame, shear, "analytic")
    b = unstable_derivative(pert_frame, shear, "fd")
    assert np.allclose(a, b, atol=1e-8)


def test_derivative_unavailable(pert_frame):
    no_jac = VectorField(lambda p: np.zeros_like(p))
    with pytest.raises(DerivativeUnavailable):
        unstable_derivative(pert_frame, no_jac, "analytic")
    with pytest.raises(DerivativeUnavailable):
        unstable_derivative(pert_frame, no_jac, "none")


def test_split_csv(tmp_path, pert_frame, shear):
    s = jet_decompose(pert_frame, shear, 40)
    path = tmp_path / "split.csv"
    s.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# spacesplit split v1"
    assert lines[1].split(",")[0] == "k" and "Xu_a" in lines[1]
    assert len(lines) == 2 + pert_frame.points.shape[0] - s.jet_valid_from
