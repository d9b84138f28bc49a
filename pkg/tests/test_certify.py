import math

import numpy as np
import pytest

from conftest import space_id
from rmest.certify import (
    ProbeParams,
    build_certificate,
    check_collinearity,
    counterexample,
    hessian_comparison_check,
    minimal_enclosing_ball,
    r0,
    tangent_basis,
)
from rmest.exceptions import DomainError, NotCoverableError
from rmest.geometry import Euclidean, Hyperbolic, Sphere
from rmest.losses import Absolute, Huber, LossClass, Lp, Tukey
from rmest.objective import WeightedSample
from rmest.solver import SolverParams, multi_start

FAST = ProbeParams(n_starts=10, n_curvature_probes=5)


def ring(space, center, radius, k, phase=0.0):
    """``k`` points at distance ``radius`` from ``center``, evenly spread in a tangent plane."""
    b = tangent_basis(space, center)
    ang = phase + 2 * math.pi * np.arange(k) / k
    vs = radius * (np.cos(ang)[:, None] * b[0] + np.sin(ang)[:, None] * b[1])
    return space.exp(np.broadcast_to(center, vs.shape), vs)


# -- r0 ------------------------------------------------------------------------

@pytest.mark.parametrize(
    "space, cls, expected",
    [
        (Sphere(2), LossClass.C2, math.pi / 4),
        (Sphere(2), LossClass.C3, math.pi / 2),
        (Sphere(2, radius=2.0), LossClass.C3, math.pi),
        (Hyperbolic(2), LossClass.C2, math.inf),
        (Hyperbolic(2), LossClass.C3, math.inf),
        (Euclidean(2), LossClass.C2, math.inf),
    ],
    ids=lambda v: v.spec() if hasattr(v, "spec") else str(v),
)
def test_r0(space, cls, expected):
    got = r0(space, cls)
    if math.isinf(expected):
        assert got == expected
    else:
        assert got == pytest.approx(expected, rel=1e-15)


def test_r0_rejects_c1only():
    with pytest.raises(DomainError):
        r0(Sphere(2), LossClass.C1ONLY)


# -- minimal enclosing ball ------------------------------------------------------------

def test_meb_examples():
    e = Euclidean(1)
    ball = minimal_enclosing_ball(e, WeightedSample(np.array([[0.0], [2.0]])))
    assert ball.center[0] == pytest.approx(1.0, abs=1e-9)
    assert ball.radius == pytest.approx(1.0, abs=1e-9)
    single = minimal_enclosing_ball(Sphere(2), WeightedSample(np.array([[0.0, 0.0, 1.0]])))
    assert single.radius == 0.0


@pytest.mark.parametrize("space", [Sphere(2), Hyperbolic(2), Sphere(3, radius=3.0)], ids=space_id)
def test_meb_recovers_equilateral_circumradius(space, rng):
    c = space.random_point_in_ball(space.base_point(), 0.5 * space.length_scale, rng)
    pts = ring(space, c, 0.3 * space.length_scale, 3, phase=rng.uniform(0, 2 * math.pi))
    ball = minimal_enclosing_ball(space, WeightedSample(pts))
    assert ball.radius == pytest.approx(0.3 * space.length_scale, rel=1e-3)
    assert space.dist(ball.center, c) <= 1e-3 * space.length_scale


@pytest.mark.parametrize("space", [Sphere(2), Hyperbolic(3), Euclidean(2)], ids=space_id)
def test_meb_covers_sample(space, rng):
    for _ in range(10):
        pts = space.random_points_in_ball(space.base_point(), 0.4 * min(space.injectivity_radius, 3.0), 15, rng)
        ball = minimal_enclosing_ball(space, WeightedSample(pts))
        assert np.all(space.dist(ball.center, pts) <= ball.radius + 1e-9)
        half_diam = 0.5 * np.max(space.dist(pts[:, None], pts[None]))
        assert ball.radius >= half_diam - 1e-12


def test_meb_not_coverable():
    with pytest.raises(NotCoverableError):
        minimal_enclosing_ball(Sphere(2), counterexample(Sphere(2), "antipodal_pair"))


# -- collinearity --------------------------------------------------------------------

def test_collinearity_examples():
    sph = Sphere(2)
    eq = np.array([[1.0, 0, 0], [math.cos(0.5), math.sin(0.5), 0], [math.cos(1.2), math.sin(1.2), 0]])
    assert check_collinearity(sph, WeightedSample(eq)).collinear
    assert check_collinearity(sph, WeightedSample(eq[:2])).collinear
    assert check_collinearity(sph, WeightedSample(eq[:1])).collinear
    # lift the middle point 0.1 toward the pole
    off = eq.copy()
    off[1] = sph.exp(eq[1], np.array([0.0, 0.0, 0.1]))
    res = check_collinearity(sph, WeightedSample(off))
    assert not res.collinear
    assert res.witness == 1
    assert res.witness_distance == pytest.approx(0.1, abs=1e-12)


@pytest.mark.parametrize("space", [Euclidean(3), Hyperbolic(2), Sphere(2)], ids=space_id)
def test_collinear_fixture_is_collinear(space, rng):
    s = counterexample(space, "collinear_median", n=6, spacing=0.2 * space.length_scale)
    assert check_collinearity(space, s).collinear
    pts = np.vstack([s.points, space.random_point_in_ball(s.points[2], 0.5, rng)])
    assert not check_collinearity(space, WeightedSample(pts)).collinear


# -- Hessian comparison ----------------------------------------------------------------

def test_hessian_flat_equality(rng):
    e = Euclidean(2)
    for _ in range(20):
        x, p, q = rng.standard_normal((3, 2))
        chk = hessian_comparison_check(e, x, p, q, rng.uniform(0.2, 0.8))
        assert chk.ok and not chk.skipped
        assert abs(chk.lhs - chk.rhs) <= 1e-6


def test_hessian_flat_closed_form():
    e = Euclidean(2)
    # gamma along the x axis through the origin; x at (0, 2): alpha = 90 deg, d = 2
    chk = hessian_comparison_check(e, np.array([0.0, 2.0]), np.array([-1.0, 0.0]), np.array([1.0, 0.0]), 0.5)
    assert chk.rhs == pytest.approx(0.5, rel=1e-15)
    assert chk.lhs == pytest.approx(0.5, rel=1e-8)


@pytest.mark.parametrize("space", [Euclidean(2), Sphere(2), Hyperbolic(2)], ids=space_id)
def test_hessian_on_geodesic_is_zero(space):
    p = space.base_point()
    e = tangent_basis(space, p)[0]
    q = space.exp(p, 0.4 * space.length_scale * e)
    x = space.exp(p, 0.9 * space.length_scale * e)
    chk = hessian_comparison_check(space, x, p, q, 0.5)
    assert chk.rhs == pytest.approx(0.0, abs=1e-12)
    assert chk.lhs == pytest.approx(0.0, abs=1e-6)
    assert chk.ok


@pytest.mark.parametrize("space", [Sphere(2), Hyperbolic(2), Sphere(3, radius=0.5)], ids=space_id)
def test_hessian_random_probes(space, rng):
    c = space.base_point()
    rad = 0.2 * min(math.pi * space.length_scale, 5.0 * space.length_scale)
    for _ in range(200):
        x, p, q = space.random_points_in_ball(c, rad, 3, rng)
        chk = hessian_comparison_check(space, x, p, q, rng.uniform(0.1, 0.9))
        assert chk.ok


def test_hessian_skips_and_rejects():
    sph = Sphere(2)
    p, q = np.array([1.0, 0, 0]), np.array([0.0, 1.0, 0])
    g = sph.geodesic_point(p, q, 0.5)
    assert hessian_comparison_check(sph, g, p, q, 0.5).skipped
    with pytest.raises(DomainError):
        hessian_comparison_check(sph, -g, p, q, 0.5)
    with pytest.raises(DomainError):
        hessian_comparison_check(sph, g, p, p, 0.5)


# -- counterexamples -------------------------------------------------------------------

def test_antipodal_pair_is_not_unique():
    sph = Sphere(2)
    s = counterexample(sph, "antipodal_pair")
    assert sph.dist(*s.points) == pytest.approx(math.pi)
    ms = multi_start(sph, s, Lp(2.0), region=(np.array([0.0, 0.0, 1.0]), 1.5), n_starts=50)
    assert ms.cluster_count >= 2
    for c in ms.clusters:
        assert c.value == pytest.approx(math.pi**2 / 4, abs=1e-8)


def test_collinear_median_is_not_unique():
    e = Euclidean(1)
    s = counterexample(e, "collinear_median")
    np.testing.assert_array_equal(s.points, [[0.0], [1.0]])
    ms = multi_start(e, s, Absolute(), region=(np.array([0.5]), 0.5), n_starts=50)
    assert ms.cluster_count >= 2
    for c in ms.clusters:
        assert 0.0 <= c.point[0] <= 1.0
        assert c.value == pytest.approx(0.5, abs=1e-12)


def test_equator_mass_has_two_polar_minimizers():
    sph = Sphere(2)
    s = counterexample(sph, "equator_mass", m=4)
    north = np.array([0.0, 0.0, 1.0])
    ms = multi_start(sph, s, Lp(2.0), region=(s.points[0], 0.95 * math.pi), n_starts=50)
    assert ms.cluster_count >= 2
    assert ms.max_intercluster_distance(sph) >= 1.0
    poles = [c for c in ms.clusters if min(sph.dist(c.point, north), sph.dist(c.point, -north)) < 1e-6]
    assert len(poles) == 2
    assert poles[0].value == pytest.approx(poles[1].value, abs=1e-12)


@pytest.mark.parametrize(
    "space, kind",
    [(Euclidean(2), "antipodal_pair"), (Hyperbolic(2), "equator_mass"), (Sphere(2), "nope")],
)
def test_counterexample_rejects(space, kind):
    with pytest.raises(DomainError):
        counterexample(space, kind)


# -- certificates -----------------------------------------------------------------------

def test_certificate_lp2_cap(rng):
    sph = Sphere(2)
    s = WeightedSample(sph.random_points_in_ball(sph.base_point(), 0.3, 30, rng))
    cert = build_certificate(sph, s, Lp(2.0), FAST)
    assert cert.theorem_clause == "Thm3b"
    assert cert.A2_satisfied and cert.uniqueness == "guaranteed"
    assert cert.existence == "guaranteed"
    assert cert.probe["cluster_count"] == 1
    assert cert.probe["min_second_derivative_seen"] > 0
    assert np.all(sph.dist(cert.enclosing_ball.center, s.points) <= cert.enclosing_ball.radius + 1e-9)


def test_certificate_huber_collinear():
    h = Hyperbolic(2)
    s = counterexample(h, "collinear_median", n=4, spacing=0.3)
    cert = build_certificate(h, s, Huber(1.0), FAST)
    assert cert.theorem_clause == "Thm3a"
    assert cert.collinear and cert.A2_satisfied
    assert cert.uniqueness == "not_certified"


def test_certificate_huber_spread_cap(rng):
    sph = Sphere(2)
    s = WeightedSample(sph.random_points_in_ball(sph.base_point(), 0.5, 20, rng))
    cert = build_certificate(sph, s, Huber(1.0), FAST)
    assert cert.theorem_clause == "Thm3a" and not cert.collinear
    assert cert.uniqueness == "guaranteed"


def test_certificate_tukey():
    sph = Sphere(2)
    s = WeightedSample(ring(sph, sph.base_point(), 0.2, 5))
    cert = build_certificate(sph, s, Tukey(1.0), FAST)
    assert cert.theorem_clause == "none" and cert.r0 is None
    assert cert.uniqueness == "not_certified" and cert.existence == "guaranteed"


def test_certificate_a2_violated():
    sph = Sphere(2)
    # radius 0.9 exceeds pi/4 (C2) but not pi/2 (C3)
    s = WeightedSample(ring(sph, sph.base_point(), 0.9, 3))
    c2 = build_certificate(sph, s, Huber(1.0), FAST)
    assert not c2.A2_satisfied and c2.uniqueness == "not_certified"
    c3 = build_certificate(sph, s, Lp(2.0), FAST)
    assert c3.A2_satisfied and c3.uniqueness == "guaranteed"


def test_certificate_antipodal_reports_reason():
    sph = Sphere(2)
    cert = build_certificate(sph, counterexample(sph, "antipodal_pair"), Lp(2.0), FAST)
    assert cert.enclosing_ball is None and not cert.A2_satisfied
    assert cert.uniqueness == "not_certified"
    assert any("enclosing ball" in r for r in cert.reasons)


def test_certificate_to_dict_and_determinism(rng):
    sph = Sphere(2)
    s = WeightedSample(sph.random_points_in_ball(sph.base_point(), 0.3, 10, rng))
    a = build_certificate(sph, s, Huber(1.0), FAST).to_dict()
    b = build_certificate(sph, s, Huber(1.0), FAST).to_dict()
    assert a == b
    assert set(a) == {
        "loss_class", "enclosing_ball", "r0", "A2_satisfied", "collinear",
        "theorem_clause", "existence", "uniqueness", "probe", "reasons",
    }
    assert a["r0"] == repr(math.pi / 4)
    hyp = build_certificate(Hyperbolic(2), WeightedSample(Hyperbolic(2).base_point()[None]), Lp(2.0), FAST)
    assert hyp.to_dict()["r0"] == "inf"


@pytest.mark.parametrize("loss", [Lp(2.0), Huber(1.0), Tukey(1.0)], ids=str)
def test_certificate_uniqueness_invariant(loss, rng):
    for space in (Sphere(2), Euclidean(2)):
        s = WeightedSample(space.random_points_in_ball(space.base_point(), 1.0, 8, rng))
        cert = build_certificate(space, s, loss, ProbeParams(n_starts=5, n_curvature_probes=0, solver=SolverParams()))
        expected = (cert.theorem_clause == "Thm3b" and cert.A2_satisfied) or (
            cert.theorem_clause == "Thm3a" and cert.A2_satisfied and cert.collinear is False
        )
        assert (cert.uniqueness == "guaranteed") == expected
        if cert.uniqueness == "guaranteed":
            assert cert.probe["cluster_count"] == 1
