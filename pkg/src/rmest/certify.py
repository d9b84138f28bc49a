"""Checkable existence/uniqueness certificates for sample M-estimators.

A certificate composes the loss class, the support radius ``r0`` below which
uniqueness is guaranteed, a witness ball enclosing the data and a collinearity
test, and attaches an empirical multi-start probe. It never claims uniqueness
outside those sufficient conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .exceptions import ClassificationError, DomainError, NotCoverableError, RMestError
from .geometry import CUT_TOL, ManifoldSpace, Sphere, pi_over_sqrt, sn_ratio
from .losses import Loss, LossClass, classify
from .objective import WeightedSample, second_derivative_along
from .solver import MultiStartResult, SolverParams, multi_start, stream

#: A2 is checked as enclosing radius < r0 - STRICT_MARGIN
STRICT_MARGIN = 1e-12
COLLINEAR_TOL = 1e-8
#: five-point stencil step, relative to min(d(x, gamma(t)), length scale)
HESSIAN_REL_STEP = 3e-3


def r0(space: ManifoldSpace, loss_class) -> float:
    """Largest support radius covered by the uniqueness theorem.

    ``min(pi/(2 sqrt(delta)), r_inj) / 2`` for C2 losses and
    ``min(pi/sqrt(delta), r_inj) / 2`` for C3 losses; infinite on
    non-positively curved spaces.
    """
    loss_class = LossClass(loss_class)
    delta, r_inj = space.curvature, space.injectivity_radius
    if loss_class == LossClass.C3:
        return 0.5 * min(pi_over_sqrt(delta), r_inj)
    if loss_class == LossClass.C2:
        return 0.5 * min(pi_over_sqrt(delta, 2.0), r_inj)
    raise DomainError("no uniqueness radius for losses outside C2/C3")


# -- minimal enclosing ball --------------------------------------------------

@dataclass
class BallEstimate:
    center: np.ndarray
    radius: float
    iterations: int


def tangent_basis(space: ManifoldSpace, p) -> np.ndarray:
    """Orthonormal basis of ``T_p`` (rows), w.r.t. the Riemannian metric."""
    p = np.asarray(p, dtype=float)
    basis = []
    for e in np.eye(space.ambient_dim):
        v = space.proj(p, e)
        for b in basis:
            v = v - space.inner(p, v, b) * b
        n = float(space.norm(p, v))
        if n > 1e-6:
            basis.append(v / n)
        if len(basis) == space.dim:
            break
    return np.array(basis)


def _euclidean_meb(y: np.ndarray) -> np.ndarray:
    """Center of the smallest Euclidean ball around the rows of ``y``.

    Solves the dual: maximize sum_i l_i |y_i|^2 - |sum_i l_i y_i|^2 over the
    probability simplex; the center is sum_i l_i y_i.
    """
    n = y.shape[0]
    sq = np.sum(y * y, axis=1)

    def f(lam):
        z = lam @ y
        return -(lam @ sq - z @ z), -(sq - 2.0 * (y @ z))

    res = minimize(
        f,
        np.full(n, 1.0 / n),
        jac=True,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * n,
        constraints=[{"type": "eq", "fun": lambda l: l.sum() - 1.0, "jac": lambda l: np.ones(n)}],
        options={"ftol": 1e-15, "maxiter": 500},
    )
    lam = np.clip(res.x, 0.0, None)
    return (lam / lam.sum()) @ y


def _pairwise(space, pts):
    return space.dist(pts[:, None, :], pts[None, :, :])


def minimal_enclosing_ball(
    space: ManifoldSpace, sample: WeightedSample, tol: float = 1e-3, bc_iters: int = 100
) -> BallEstimate:
    """Approximate geodesic 1-center of the sample.

    Farthest-point stepping ``c <- gamma(c, farthest, 1/(k+1))`` gives a
    starting ball; it is then refined by re-centering on the exact Euclidean
    enclosing ball of the log-mapped data until the radius stops shrinking by
    more than ``tol * 1e-6`` relative. The returned radius is the covering
    radius of the returned center, so the ball always contains the sample.
    """
    pts = sample.points
    if len(pts) == 1:
        return BallEstimate(pts[0].copy(), 0.0, 0)
    diam = float(np.max(_pairwise(space, pts)))
    r_inj = space.injectivity_radius
    if math.isfinite(r_inj) and diam >= r_inj - CUT_TOL * space.length_scale:
        raise NotCoverableError(f"sample diameter {diam} reaches the injectivity radius {r_inj}")

    c = pts[0].copy()
    best_c, best_r = c, float(np.max(space.dist(c, pts)))
    its = 0
    for k in range(1, bc_iters + 1):
        d = space.dist(c, pts)
        far = int(np.argmax(d))
        c = space.geodesic_point(c, pts[far], 1.0 / (k + 1))
        r = float(np.max(space.dist(c, pts)))
        its += 1
        if r < best_r:
            best_c, best_r = c, r

    for _ in range(50):
        basis = tangent_basis(space, best_c)
        logs = space.log(best_c, pts)
        y = np.array([[space.inner(best_c, v, b) for b in basis] for v in logs])
        z = _euclidean_meb(y)
        c = space.exp(best_c, z @ basis)
        r = float(np.max(space.dist(c, pts)))
        its += 1
        if r < best_r:
            improved = (best_r - r) / best_r
            best_c, best_r = c, r
            if improved < tol * 1e-6:
                break
        else:
            break
    return BallEstimate(best_c, best_r, its)


# -- collinearity --------------------------------------------------------------

@dataclass
class CollinearityResult:
    collinear: bool
    witness: int | None
    witness_distance: float


def check_collinearity(space: ManifoldSpace, sample: WeightedSample, tol: float = COLLINEAR_TOL):
    """Do all sample points lie within ``tol`` of one geodesic?

    The candidate geodesic is the one through the two farthest-apart points.
    """
    pts = sample.points
    if len(pts) <= 2:
        return CollinearityResult(True, None, 0.0)
    d = _pairwise(space, pts)
    r_inj = space.injectivity_radius
    if math.isfinite(r_inj) and np.max(d) >= r_inj - CUT_TOL * space.length_scale:
        raise DomainError("pairwise distances must stay below the injectivity radius")
    i, j = np.unravel_index(int(np.argmax(d)), d.shape)
    if d[i, j] == 0:
        return CollinearityResult(True, None, 0.0)
    off = space.distance_to_geodesic(pts[i], pts[j], pts)
    w = int(np.argmax(off))
    return CollinearityResult(bool(off[w] <= tol), w, float(off[w]))


# -- Hessian comparison ------------------------------------------------------

@dataclass
class HessianCheck:
    lhs: float
    rhs: float
    ok: bool
    skipped: bool = False


def hessian_comparison_check(space: ManifoldSpace, x, p, q, t: float, tol: float = 1e-5) -> HessianCheck:
    """Compare d^2/ds^2 d(x, gamma(s)) with the curvature bound (sn'/sn)(d) sin^2(alpha).

    ``gamma`` is the unit-speed minimal geodesic from ``p`` towards ``q`` and
    ``s = t * d(p, q)``; ``alpha`` is the angle at ``gamma(s)`` between the
    geodesic and the direction to ``x``. The left side uses a five-point
    central difference. On the model spaces the bound is attained, so
    ``lhs - rhs`` is pure discretization error there.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    v = space.log(p, q)
    length = float(space.norm(p, v))
    if length == 0:
        raise DomainError("p and q must differ")
    e = v / length
    s = t * length
    g = space.exp(p, s * e)
    dist = float(space.dist(x, g))
    delta = space.curvature
    limit = min(0.5 * pi_over_sqrt(delta), space.injectivity_radius)
    if not dist < limit:
        raise DomainError(f"d(x, gamma(t)) = {dist} must stay below {limit}")
    if dist <= 1e-6 * space.length_scale:
        return HessianCheck(math.nan, math.nan, True, skipped=True)
    vel = space.geodesic_velocity(p, e, s)
    vel = vel / space.norm(g, vel)
    # stencil taken from gamma(s) itself: offsets from p would add round-off
    # proportional to the coordinate size (large on the hyperboloid)
    h = HESSIAN_REL_STEP * min(dist, space.length_scale)
    offs = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * h
    f = space.dist(x, space.exp(g, offs[:, None] * vel))
    lhs = float((-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h))

    u = space.log(g, x)
    perp = u - space.inner(g, u, vel) * vel
    sin2 = float(space.inner(g, perp, perp) / space.inner(g, u, u))
    rhs = float(sn_ratio(dist, delta)) * min(max(sin2, 0.0), 1.0)
    return HessianCheck(lhs, rhs, lhs >= rhs - tol)


# -- counterexamples -----------------------------------------------------------

COUNTEREXAMPLES = ("antipodal_pair", "collinear_median", "equator_mass")


def counterexample(space: ManifoldSpace, kind: str, m: int = 4, n: int = 2, spacing: float = 1.0) -> WeightedSample:
    """Samples whose M-estimator set is not a single point.

    ``antipodal_pair``: {x, -x} on a sphere. ``collinear_median``: ``n`` (even)
    evenly spaced points on one geodesic, meant for the absolute loss.
    ``equator_mass``: ``m`` evenly spaced points on a great circle; both poles
    minimize by symmetry.
    """
    if kind == "antipodal_pair":
        if not isinstance(space, Sphere):
            raise DomainError("antipodal_pair needs a sphere")
        x = space.base_point()
        return WeightedSample(np.array([x, -x]))
    if kind == "collinear_median":
        if n < 2 or n % 2:
            raise DomainError("collinear_median needs an even number of points >= 2")
        base = space.base_point()
        e = tangent_basis(space, base)[0]
        return WeightedSample(np.array([space.exp(base, (k * spacing) * e) for k in range(n)]))
    if kind == "equator_mass":
        if not isinstance(space, Sphere) or space.dim < 2:
            raise DomainError("equator_mass needs a sphere of dimension >= 2")
        if m < 3:
            raise DomainError("equator_mass needs m >= 3")
        ang = 2.0 * math.pi * np.arange(m) / m
        pts = np.zeros((m, space.dim + 1))
        pts[:, 0] = space.radius * np.cos(ang)
        pts[:, 1] = space.radius * np.sin(ang)
        return WeightedSample(pts)
    raise DomainError(f"unknown counterexample kind {kind!r}")


# -- certificate ---------------------------------------------------------------

@dataclass(frozen=True)
class ProbeParams:
    n_starts: int = 50
    n_curvature_probes: int = 20
    solver: SolverParams = field(default_factory=SolverParams)


@dataclass
class Certificate:
    loss_class: LossClass
    enclosing_ball: BallEstimate | None
    r0: float | None
    A2_satisfied: bool
    collinear: bool | None
    theorem_clause: str
    existence: str
    uniqueness: str
    probe: dict
    reasons: list[str] = field(default_factory=list)
    probe_result: MultiStartResult | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        ball = None
        if self.enclosing_ball is not None:
            ball = {
                "center": [float(v) for v in self.enclosing_ball.center],
                "radius": fmt_real(self.enclosing_ball.radius),
            }
        return {
            "loss_class": str(self.loss_class),
            "enclosing_ball": ball,
            "r0": None if self.r0 is None else fmt_real(self.r0),
            "A2_satisfied": self.A2_satisfied,
            "collinear": self.collinear,
            "theorem_clause": self.theorem_clause,
            "existence": self.existence,
            "uniqueness": self.uniqueness,
            "probe": {
                "cluster_count": self.probe["cluster_count"],
                "max_intercluster_distance": fmt_real(self.probe["max_intercluster_distance"]),
                "min_second_derivative_seen": fmt_real(self.probe["min_second_derivative_seen"]),
            },
            "reasons": list(self.reasons),
        }


def fmt_real(x) -> str:
    """Decimal string with infinity spelled ``inf``."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return repr(x)


def _curvature_probe(space, sample, loss, ball, n, seed):
    if ball is None or ball.radius <= 0 or n <= 0:
        return math.nan
    rng = stream(seed, "probes")
    seen = []
    for _ in range(n):
        p = space.random_point_in_ball(ball.center, ball.radius, rng)
        q = space.random_point_in_ball(ball.center, ball.radius, rng)
        if float(space.dist(p, q)) < 1e-6 * space.length_scale:
            continue
        try:
            val = second_derivative_along(space, sample, loss, p, q, 0.5)
        except RMestError:
            continue
        if not math.isnan(val):
            seen.append(val)
    return min(seen) if seen else math.nan


def build_certificate(
    space: ManifoldSpace,
    sample: WeightedSample,
    loss: Loss,
    probe_params: ProbeParams | None = None,
    probe_result: MultiStartResult | None = None,
) -> Certificate:
    """Resolve which uniqueness clause applies and attach the empirical probe.

    Existence always holds for a finite sample. Uniqueness is ``guaranteed``
    only for a C3 loss with the data in a ball of radius below ``r0``, or a C2
    loss with such data not lying on one geodesic.
    """
    probe_params = probe_params or ProbeParams()
    reasons = []
    try:
        loss_class = classify(loss).verified
    except ClassificationError as exc:
        loss_class = LossClass.C1ONLY
        reasons.append(f"classification failed: {exc}")

    try:
        ball = minimal_enclosing_ball(space, sample)
    except RMestError as exc:
        ball = None
        reasons.append(f"no enclosing ball: {exc}")

    radius0 = None
    a2 = False
    if loss_class == LossClass.C1ONLY:
        reasons.append("loss is not C2/C3: uniqueness theorem does not apply")
    else:
        radius0 = r0(space, loss_class)
        if ball is not None:
            a2 = ball.radius < radius0 - STRICT_MARGIN
            if not a2:
                reasons.append(f"enclosing radius {ball.radius!r} is not below r0 = {radius0!r}")

    try:
        collinear = check_collinearity(space, sample).collinear
    except RMestError as exc:
        collinear = None
        reasons.append(f"collinearity undetermined: {exc}")

    clause = {LossClass.C3: "Thm3b", LossClass.C2: "Thm3a"}.get(loss_class, "none")
    unique = (clause == "Thm3b" and a2) or (clause == "Thm3a" and a2 and collinear is False)
    if clause == "Thm3a" and a2 and collinear is not False:
        reasons.append("C2 loss with data on a single geodesic")

    if probe_result is None:
        region = (ball.center, ball.radius) if ball is not None else None
        probe_result = multi_start(
            space, sample, loss, region=region, n_starts=probe_params.n_starts, params=probe_params.solver
        )
    probe = {
        "cluster_count": probe_result.cluster_count,
        "max_intercluster_distance": probe_result.max_intercluster_distance(space),
        "min_second_derivative_seen": _curvature_probe(
            space, sample, loss, ball, probe_params.n_curvature_probes, probe_params.solver.seed
        ),
    }
    return Certificate(
        loss_class=loss_class,
        enclosing_ball=ball,
        r0=radius0,
        A2_satisfied=a2,
        collinear=collinear,
        theorem_clause=clause,
        existence="guaranteed",
        uniqueness="guaranteed" if unique else "not_certified",
        probe=probe,
        reasons=reasons,
        probe_result=probe_result,
    )

