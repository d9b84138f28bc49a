import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import SPACES, local_radius, space_id
from rmest.exceptions import CutLocusError, DomainError, ValidationError
from rmest.geometry import (
    Euclidean,
    Hyperbolic,
    Sphere,
    curvature_constants,
    make_space,
    parse_space,
    sn_delta,
    sn_ratio,
)

INF = math.inf


# -- closed-form examples ------------------------------------------------------

@pytest.mark.parametrize(
    "space, p, q, expected",
    [
        (Sphere(2), [1, 0, 0], [0, 1, 0], math.pi / 2),
        (Euclidean(2), [0, 0], [3, 4], 5.0),
        (Hyperbolic(2), [1, 0, 0], [math.cosh(1), math.sinh(1), 0], 1.0),
        (Sphere(2, radius=2.0), [2, 0, 0], [0, 0, 2], math.pi),
        (Hyperbolic(1, kappa=4.0), [0.5, 0], [0.5 * math.cosh(2), 0.5 * math.sinh(2)], 1.0),
    ],
)
def test_dist_examples(space, p, q, expected):
    assert space.dist(np.array(p, float), np.array(q, float)) == pytest.approx(expected, abs=1e-12)


def test_log_examples():
    s = Sphere(2)
    v = s.log(np.array([1.0, 0, 0]), np.array([0.0, 1, 0]))
    np.testing.assert_allclose(v, [0, math.pi / 2, 0], atol=1e-15)
    e = Euclidean(2)
    np.testing.assert_allclose(e.log(np.array([1.0, 2]), np.array([4.0, -1])), [3, -3])
    for space in SPACES:
        p = space.base_point()
        np.testing.assert_array_equal(space.log(p, p), np.zeros_like(p))


def test_exp_examples():
    s = Sphere(2)
    q = s.exp(np.array([1.0, 0, 0]), np.array([0.0, math.pi / 2, 0]))
    np.testing.assert_allclose(q, [0, 1, 0], atol=1e-15)
    for space in SPACES:
        p = space.base_point()
        np.testing.assert_array_equal(space.exp(p, np.zeros_like(p)), p)


@pytest.mark.parametrize("space", [Sphere(2), Hyperbolic(2)], ids=space_id)
def test_exp_rejects_non_tangent(space):
    p = space.base_point()
    with pytest.raises(ValidationError):
        space.exp(p, np.array([1.0, 0.5, 0.0]))


def test_geodesic_point_examples():
    e = Euclidean(1)
    assert e.geodesic_point(np.array([0.0]), np.array([2.0]), 0.5) == pytest.approx([1.0])
    s = Sphere(2)
    p, q = np.array([1.0, 0, 0]), np.array([0.0, 1, 0])
    np.testing.assert_allclose(s.geodesic_point(p, q, 0.5), [1 / math.sqrt(2), 1 / math.sqrt(2), 0])
    np.testing.assert_allclose(s.geodesic_point(p, q, 0.0), p, atol=1e-15)
    np.testing.assert_allclose(s.geodesic_point(p, q, 1.0), q, atol=1e-15)


def test_antipodal_log_is_rejected():
    s = Sphere(2)
    with pytest.raises(CutLocusError):
        s.log(np.array([0.0, 0, 1]), np.array([0.0, 0, -1]))
    with pytest.raises(DomainError):
        s.geodesic_point(np.array([0.0, 0, 1]), np.array([0.0, 0, -1]), 0.5)


# -- sn_delta and curvature constants -----------------------------------------

@pytest.mark.parametrize(
    "s, delta, expected",
    [
        (0.7, 0.0, 0.7),
        (math.pi / 2, 1.0, 1.0),
        (1.0, -1.0, 1.1752011936438014),
        (1.0, 4.0, math.sin(2.0) / 2.0),
        (2.0, -0.25, 2.0 * math.sinh(1.0)),
    ],
)
def test_sn_delta_values(s, delta, expected):
    assert sn_delta(s, delta) == pytest.approx(expected, rel=1e-14)


def test_sn_delta_continuous_at_zero():
    for s in (0.1, 1.0, 3.0):
        assert sn_delta(s, 1e-12) == pytest.approx(s, rel=1e-10)
        assert sn_delta(s, -1e-12) == pytest.approx(s, rel=1e-10)


@given(st.floats(0.05, 4.0), st.floats(0.0, 1.0))
def test_sn_delta_monotone_before_quarter_period(delta, frac):
    top = math.pi / (2 * math.sqrt(delta))
    s1 = frac * top * 0.999
    s2 = min(s1 + 1e-3 * top, 0.999 * top)
    assert sn_delta(s2, delta) >= sn_delta(s1, delta)


def test_sn_ratio_is_log_derivative():
    for delta in (1.0, 0.0, -2.0):
        s, h = 0.8, 1e-6
        fd = (sn_delta(s + h, delta) - sn_delta(s - h, delta)) / (2 * h) / sn_delta(s, delta)
        assert sn_ratio(s, delta) == pytest.approx(fd, rel=1e-8)


@pytest.mark.parametrize(
    "space, expected",
    [
        (Sphere(2), (1.0, math.pi, math.pi / 2)),
        (Sphere(2, radius=2.0), (0.25, 2 * math.pi, math.pi)),
        (Euclidean(3), (0.0, INF, INF)),
        (Hyperbolic(2), (-1.0, INF, INF)),
        (Hyperbolic(2, kappa=3.0), (-3.0, INF, INF)),
    ],
    ids=lambda v: v.spec() if hasattr(v, "spec") else None,
)
def test_curvature_constants(space, expected):
    got = curvature_constants(space)
    for g, e in zip(got, expected):
        assert g == pytest.approx(e, rel=1e-15) if math.isfinite(e) else g == e


# -- construction and validation ----------------------------------------------

@pytest.mark.parametrize(
    "text, kind, dim, scale",
    [
        ("sphere:dim=2", "sphere", 2, 1.0),
        ("sphere:dim=3,scale=2.5", "sphere", 3, 2.5),
        ("hyperbolic:dim=2,kappa=0.5", "hyperbolic", 2, 0.5),
        ("euclidean:dim=4", "euclidean", 4, 1.0),
    ],
)
def test_parse_space(text, kind, dim, scale):
    s = parse_space(text)
    assert (s.kind, s.dim, s.scale) == (kind, dim, scale)
    assert parse_space(s.spec()) == s


@pytest.mark.parametrize("text", ["", "torus:dim=2", "sphere:dim=0", "sphere:dim=2,scale=-1", "sphere:dim=x"])
def test_parse_space_rejects(text):
    with pytest.raises(ValidationError):
        parse_space(text)


def test_make_space_kinds():
    assert isinstance(make_space("sphere", 2, 3.0), Sphere)
    assert make_space("hyperbolic", 2, 2.0).curvature == -2.0


def test_validate_renormalizes_small_residuals():
    s = Sphere(2)
    x = s.validate([1.0 + 1e-8, 0.0, 0.0])
    assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValidationError):
        s.validate([1.1, 0.0, 0.0])
    h = Hyperbolic(2)
    y = h.validate([math.cosh(1.0) * (1 + 1e-8), math.sinh(1.0), 0.0])
    assert -y[0] ** 2 + y[1] ** 2 + y[2] ** 2 == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(ValidationError):
        h.validate([2.0, 0.0, 0.0])
    with pytest.raises(ValidationError):
        Euclidean(2).validate([1.0, 2.0, 3.0])


# -- random points -------------------------------------------------------------

def test_random_point_in_ball_properties():
    s = Sphere(2)
    c = s.base_point()
    pts = s.random_points_in_ball(c, math.pi / 4, 10_000, 0)
    assert np.max(s.dist(c, pts)) < math.pi / 4
    tiny = s.random_point_in_ball(c, 1e-12, 3)
    assert s.dist(c, tiny) <= 1e-12
    np.testing.assert_array_equal(s.random_point_in_ball(c, 0.5, 9), s.random_point_in_ball(c, 0.5, 9))
    with pytest.raises(DomainError):
        s.random_point_in_ball(c, 4.0, 0)
    with pytest.raises(DomainError):
        s.random_point_in_ball(c, 0.0, 0)


# -- invariants over random configurations ----------------------------------------

@pytest.mark.parametrize("space", SPACES, ids=space_id)
def test_metric_axioms_and_exp_log(space, rng):
    r = local_radius(space)
    c = space.base_point()
    p, q, w = (space.random_points_in_ball(c, r, 500, rng) for _ in range(3))
    d = space.dist(p, q)
    np.testing.assert_allclose(d, space.dist(q, p), atol=1e-12)
    assert np.all(space.dist(p, p) <= 1e-12 * space.length_scale)
    assert np.all(space.dist(p, w) <= d + space.dist(q, w) + 1e-9)
    v = space.log(p, q)
    np.testing.assert_allclose(space.norm(p, v), d, atol=1e-9)
    assert np.max(space.dist(space.exp(p, v), q)) <= 1e-9
    assert np.max(np.abs(space._tangency(p, v))) <= 1e-9 * (1 + np.max(np.abs(p)))


@pytest.mark.parametrize("space", SPACES, ids=space_id)
@given(a=st.floats(0, 1), b=st.floats(0, 1), seed=st.integers(0, 2**32 - 1))
def test_geodesic_constant_speed(space, a, b, seed):
    rng = np.random.default_rng(seed)
    c = space.base_point()
    p, q = space.random_points_in_ball(c, local_radius(space), 2, rng)
    d = space.dist(p, q)
    ga, gb = space.geodesic_point(p, q, a), space.geodesic_point(p, q, b)
    assert abs(space.dist(ga, gb) - abs(a - b) * d) <= 1e-9


@pytest.mark.parametrize("space", SPACES, ids=space_id)
def test_geodesic_velocity_matches_difference(space, rng):
    p = space.base_point()
    e = space.random_tangent(p, rng)
    s, h = 0.7 * space.length_scale, 1e-6
    fd = (space.exp(p, (s + h) * e) - space.exp(p, (s - h) * e)) / (2 * h)
    np.testing.assert_allclose(space.geodesic_velocity(p, e, s), fd, atol=1e-8)


def test_sphere_rotation_invariance(rng):
    s = Sphere(2)
    q_mat, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    p, q = s.random_points_in_ball(s.base_point(), 2.0, 2, rng)
    assert s.dist(p @ q_mat.T, q @ q_mat.T) == pytest.approx(s.dist(p, q), abs=1e-14)


@pytest.mark.parametrize("space", [Euclidean(2), Sphere(2), Hyperbolic(2)], ids=space_id)
def test_distance_to_geodesic(space, rng):
    c = space.base_point()
    a, b = space.random_points_in_ball(c, 0.5 * space.length_scale, 2, rng)
    on = space.geodesic_point(a, b, np.array([-0.5, 0.3, 1.7]))
    assert np.max(space.distance_to_geodesic(a, b, on)) <= 1e-12
    # push a point of the geodesic orthogonally off it by 0.1
    g = space.geodesic_point(a, b, 0.4)
    vel = space.log(g, b)
    n = space.random_tangent(g, rng)
    n = n - space.inner(g, n, vel) / space.inner(g, vel, vel) * vel
    n = n / space.norm(g, n)
    x = space.exp(g, 0.1 * space.length_scale * n)
    assert space.distance_to_geodesic(a, b, x) == pytest.approx(0.1 * space.length_scale, abs=1e-12)
