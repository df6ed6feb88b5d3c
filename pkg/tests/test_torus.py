import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spacesplit.errors import InversionFailure
from spacesplit.expressions import field_from_expressions
from spacesplit.torus import (TorusPoint, cat_map, evolve_orbit, hessian_error,
                              jacobian_error, newton_solve, perturbed_cat_map,
                              perturbed_map, pushforward_field, torus_distance, wrap,
                              zero_field)

from conftest import LAMBDA_S, LAMBDA_U

coord = st.floats(min_value=0.0, max_value=1.0, exclude_max=True, allow_nan=False)


def test_cat_map_examples(cat):
    assert np.array_equal(cat((0.0, 0.0)), [0.0, 0.0])
    assert np.allclose(cat((0.5, 0.5)), [0.5, 0.0])
    assert np.array_equal(cat.jacobian((0.3, 0.1)), [[2, 1], [1, 1]])
    assert np.array_equal(cat.inverse(np.array([0.5, 0.0])), [0.5, 0.5])
    assert np.all(cat.hessian_action((0.2, 0.3), np.ones(2), np.ones(2)) == 0)


def test_cat_eigenvalues_match_closed_form(cat):
    ev = np.sort(np.linalg.eigvalsh(cat.jacobian((0.0, 0.0))))
    # independent quadratic solve of l^2 - 3 l + 1 = 0
    disc = math.sqrt(9 - 4)
    assert ev[1] == pytest.approx((3 + disc) / 2, abs=1e-12)
    assert ev[0] == pytest.approx((3 - disc) / 2, abs=1e-12)
    assert ev[1] == pytest.approx(2.6180340, abs=1e-7)
    assert ev[0] == pytest.approx(0.3819660, abs=1e-7)
    assert LAMBDA_U * LAMBDA_S == pytest.approx(1.0)


def test_cat_map_rejects_non_hyperbolic():
    with pytest.raises(ValueError):
        cat_map(((1, 1), (0, 1)))


def test_torus_point_wraps():
    p = TorusPoint(1.25, -0.25)
    assert (p.x, p.y) == (0.25, 0.75)
    assert TorusPoint.from_array(p.as_array()) == p
    assert wrap(np.array([-1e-18]))[0] == 0.0


def test_torus_distance_is_flat_min_over_shifts():
    assert torus_distance(np.array([0.01, 0.5]), np.array([0.99, 0.5])) == pytest.approx(0.02)


def test_perturbed_zero_t_is_cat(cat, shear):
    m = perturbed_cat_map(0.0, shear)
    p = np.random.default_rng(1).random((50, 2))
    assert np.array_equal(m(p), cat(p))
    assert np.array_equal(m.jacobian(p), cat.jacobian(p))


def test_perturbed_hand_evaluation(shear):
    m = perturbed_cat_map(1e-3, shear)
    # cat image of (0.25, 0) is (0.5, 0.25); the shift t sin(2 pi 0.5) vanishes
    assert np.allclose(m((0.25, 0.0)), [0.5, 0.25], atol=1e-15)


@pytest.mark.parametrize("t", [1e-3, 1e-2, 0.1])
def test_perturbed_round_trip(shear, t):
    m = perturbed_cat_map(t, shear)
    p = np.random.default_rng(2).random((100, 2))
    assert np.max(torus_distance(m.inverse(m(p)), p)) < 1e-12


@pytest.mark.parametrize("t", [0.0, 1e-3, 0.1])
def test_derivatives_match_finite_differences(shear, t):
    m = perturbed_cat_map(t, shear)
    rng = np.random.default_rng(3)
    p = rng.random((64, 2))
    u, v = rng.normal(size=(2, 64, 2))
    assert jacobian_error(m, p) < 1e-6
    assert hessian_error(m, p, u, v) < 1e-6


def test_fd_hessian_mode_agrees(shear):
    m = perturbed_cat_map(0.1, shear)
    fd = m.with_fd_hessian()
    assert fd.hessian_mode == "fd" and m.hessian_mode == "analytic"
    rng = np.random.default_rng(4)
    p, u, v = rng.random((20, 2)), rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
    assert np.allclose(fd.hessian_action(p, u, v), m.hessian_action(p, u, v), atol=1e-8)


def test_perturbation_too_large_is_rejected(shear):
    with pytest.raises(ValueError):
        perturbed_cat_map(0.2, field_from_expressions(["sin(2*pi*x)", "0"]))


def test_newton_failure_raises():
    with pytest.raises(InversionFailure):
        newton_solve(lambda q: q * 0 + 0.3, lambda q: np.eye(2), np.array([0.1, 0.1]),
                     seed=np.array([0.0, 0.0]), max_iter=5)


def test_orbit_examples(cat):
    orb = evolve_orbit(cat, (0.0, 0.0), 5)
    assert orb.points.shape == (6, 2) and np.all(orb.points == 0)
    orb = evolve_orbit(cat, (0.1, 0.2), 1)
    assert np.allclose(orb.points, [[0.1, 0.2], [0.4, 0.3]])
    with pytest.raises(ValueError):
        evolve_orbit(cat, (0.1, 0.2), 0)


def test_orbit_consecutive_points(shear):
    m = perturbed_cat_map(1e-2, shear)
    fwd = evolve_orbit(m, (0.3, 0.6), 50)
    assert np.max(torus_distance(m(fwd.points[:-1]), fwd.points[1:])) < 1e-12
    back = evolve_orbit(m, (0.3, 0.6), 50, "backward")
    assert np.max(torus_distance(m(back.points[1:]), back.points[:-1])) < 1e-12
    assert np.array_equal(back.forward_order()[-1], back.points[0])


def test_orbit_average_of_cos_is_lebesgue(cat):
    x0 = np.random.default_rng(11).random(2)
    orb = evolve_orbit(cat, x0, 10**6)
    assert abs(np.mean(np.cos(2 * np.pi * orb.points[:, 0]))) < 5e-3


def test_orbit_determinism(cat):
    a = evolve_orbit(cat, np.random.default_rng(5).random((3, 2)), 100).points
    b = evolve_orbit(cat, np.random.default_rng(5).random((3, 2)), 100).points
    assert np.array_equal(a, b)


def test_orbit_csv(tmp_path, cat):
    path = tmp_path / "orbit.csv"
    evolve_orbit(cat, (0.1, 0.2), 3).to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# spacesplit orbit v")
    assert lines[1] == "k,x,y" and len(lines) == 6


def test_pushforward_field_jacobian(shear):
    m = perturbed_cat_map(0.05, shear)
    V = field_from_expressions(["0.1*sin(2*pi*y)", "cos(2*pi*x)"])
    TV = pushforward_field(m, V)
    p = np.random.default_rng(6).random((10, 2))
    num = np.stack([(TV(p + e) - TV(p - e)) / 2e-6 for e in np.eye(2) * 1e-6], axis=-1)
    assert np.allclose(TV.jacobian(p), num, atol=1e-6)


def test_zero_field():
    Z = zero_field()
    p = np.random.default_rng(0).random((4, 2))
    assert np.all(Z(p) == 0) and np.all(Z.jacobian(p) == 0)


@settings(max_examples=60, deadline=None)
@given(coord, coord)
def test_round_trip_property(x, y):
    cat = cat_map()
    p = np.array([x, y])
    assert torus_distance(cat.inverse(cat(p)), p) < 1e-12
    q = cat(p)
    assert np.all((q >= 0) & (q < 1))


@settings(max_examples=40, deadline=None)
@given(coord, coord, st.integers(-3, 3), st.integers(-3, 3))
def test_field_periodicity(x, y, i, j):
    X = field_from_expressions(["0.1*sin(2*pi*y)", "sin(2*pi*x)"])
    p = np.array([x, y])
    assert np.allclose(X(p), X(p + np.array([i, j])), atol=1e-12)
