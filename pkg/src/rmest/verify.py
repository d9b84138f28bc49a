"""Property suites checking the existence and uniqueness theory at desk scale.

Each suite draws its fixtures from its own seeded stream, so running one
suite alone gives the same result as running it inside the full set. Reports
contain no timings and are byte-for-byte reproducible for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fixtures
from .certify import (
    Certificate,
    ProbeParams,
    build_certificate,
    counterexample,
    hessian_comparison_check,
    r0,
    tangent_basis,
)
from .exceptions import CutLocusError
from .geometry import Euclidean, Hyperbolic, ManifoldSpace, Sphere
from .losses import Absolute, Huber, Loss, Lp, SoftplusSquare, bundled_losses, lemma2_gap
from .objective import WeightedSample, evaluate, risk
from .solver import STREAMS, SolverParams, minimize_rgd, multi_start

SPACES = (Sphere(2), Hyperbolic(2), Euclidean(2))

GEOMETRY_TOL = 1e-9
GRADIENT_TOL = 1e-5
LEMMA2_TOL = 1e-12
GRAD_TOL = 1e-9
CONTAINMENT_SLACK = 1e-6
COUNTER_VALUE_TOL = 1e-8
HESSIAN_TOL = 1e-5
HESSIAN_EQ_TOL = 1e-6
MEAN_TOL = 1e-10
WEISZFELD_TOL = 1e-7
GRID_VALUE_TOL = 1e-4


@dataclass
class SuiteResult:
    name: str
    passed: bool
    trials: int
    worst_margin: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "trials": self.trials,
            "worst_margin": self.worst_margin,
            "details": self.details,
        }


@dataclass
class Instance:
    space: ManifoldSpace
    sample: WeightedSample
    loss: Loss
    certificate: Certificate


class Context:
    """Per-run state: the root seed and instances shared between suites."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._instances: dict[str, list[Instance]] = {}

    def rng(self, suite: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, STREAMS["fixtures"], SUITE_IDS[suite]])

    def solver(self, **kw) -> SolverParams:
        return SolverParams(seed=self.seed, **kw)

    def instances(self, key: str) -> list[Instance]:
        if key not in self._instances:
            self._instances[key] = INSTANCE_BUILDERS[key](self)
        return self._instances[key]


def _result(name, margins, trials, details, passed=None):
    worst = float(min(margins)) if len(margins) else math.inf
    ok = worst >= 0 if passed is None else passed
    return SuiteResult(name, bool(ok), int(trials), worst, details)


def _random_centers(space, n, rng):
    """Points spread over the space (uniform on spheres)."""
    if isinstance(space, Sphere):
        x = rng.standard_normal((n, space.ambient_dim))
        return space.radius * x / np.linalg.norm(x, axis=1)[:, None]
    return space.random_points_in_ball(space.base_point(), 3.0 * space.length_scale, n, rng)


# -- geometry -------------------------------------------------------------------

def suite_geometry(ctx: Context, trials: int = 10_000) -> SuiteResult:
    """exp/log round trip, |log| = dist and constant speed along geodesics."""
    rng = ctx.rng("geometry")
    margins, details = [], {}
    for space in SPACES:
        p = _random_centers(space, trials, rng)
        e = space.random_tangent(p, rng)
        if isinstance(space, Sphere):
            reach = 0.95 * space.injectivity_radius
        else:
            reach = 5.0 * space.length_scale
        s = reach * rng.random(trials)
        q = space.exp(p, s[:, None] * e)
        v = space.log(p, q)
        d = space.dist(p, q)
        roundtrip = space.dist(space.exp(p, v), q)
        norm_err = np.abs(space.norm(p, v) - d)
        a, b = rng.random(trials), rng.random(trials)
        speed_err = np.abs(
            space.dist(space.geodesic_point(p, q, a), space.geodesic_point(p, q, b)) - np.abs(a - b) * d
        )
        worst = float(max(roundtrip.max(), norm_err.max(), speed_err.max()))
        details[space.spec()] = {
            "max_roundtrip_error": float(roundtrip.max()),
            "max_log_norm_error": float(norm_err.max()),
            "max_speed_error": float(speed_err.max()),
        }
        margins.append(GEOMETRY_TOL - worst)
    return _result("geometry", margins, trials * len(SPACES), details)


# -- gradient -------------------------------------------------------------------

def _gradient_instance(space, loss, rng):
    radius = 0.45 * math.pi * space.length_scale if isinstance(space, Sphere) else 2.0 * space.length_scale
    center = _random_centers(space, 1, rng)[0]
    while True:
        n = int(rng.integers(3, 11))
        pts = space.random_points_in_ball(center, radius, n, rng)
        m = space.random_point_in_ball(center, radius, rng)
        d = space.dist(m, pts)
        if np.min(d) < 1e-3 * space.length_scale:
            continue
        if any(np.min(np.abs(d - s)) < 1e-3 for s in loss.exception_set):
            continue
        w = rng.random(n) + 0.1
        return WeightedSample(pts, w), m, d


def suite_gradient(ctx: Context, trials: int = 1000) -> SuiteResult:
    """Analytic Riemannian gradient against central differences of the risk."""
    rng = ctx.rng("gradient")
    losses = bundled_losses(1.0)
    worst_rel, margins = 0.0, []
    for i in range(trials):
        space = SPACES[i % len(SPACES)]
        loss = losses[(i // len(SPACES)) % len(losses)]
        sample, m, d = _gradient_instance(space, loss, rng)
        g = evaluate(space, sample, loss, m).grad
        h = 1e-6 * (space.length_scale + float(np.max(d)))
        fd = np.zeros_like(g)
        for b in tangent_basis(space, m):
            fp = risk(space, sample, loss, space.exp(m, h * b))
            fm = risk(space, sample, loss, space.exp(m, -h * b))
            fd = fd + (fp - fm) / (2.0 * h) * b
        diff = float(space.norm(m, fd - g))
        scale = max(float(space.norm(m, g)), 1e-8)
        rel = diff / scale
        worst_rel = max(worst_rel, rel)
        margins.append(GRADIENT_TOL - rel)
    return _result("gradient", margins, trials, {"max_relative_error": worst_rel})


# -- Lemma 2 --------------------------------------------------------------------

def suite_lemma2(ctx: Context, points: int = 1000) -> SuiteResult:
    """t rho''(t) - rho'(t) >= 0 on a log grid for the convex-derivative losses."""
    t = np.logspace(-6, 3, points)
    details, margins = {}, []
    for loss in (Lp(2.0), Lp(2.5), Lp(3.0), Lp(4.0), SoftplusSquare()):
        gap = lemma2_gap(loss, t, require_c3=False)
        low = float(np.min(gap))
        details[loss.spec()] = {"min_gap": low, "argmin_t": float(t[int(np.argmin(gap))])}
        margins.append(low + LEMMA2_TOL)
    return _result("lemma2", margins, points * 5, details)


# -- instance families shared by the uniqueness, containment and soundness suites

def _certify(ctx, space, pts, loss, n_starts=50, weights=None):
    sample = WeightedSample(pts, weights)
    cert = build_certificate(space, sample, loss, ProbeParams(n_starts=n_starts, solver=ctx.solver()))
    return Instance(space, sample, loss, cert)


def _existence_instances(ctx: Context, count: int = 100) -> list[Instance]:
    rng = ctx.rng("existence")
    losses = bundled_losses(1.0)
    out = []
    for i in range(count):
        space = SPACES[i % len(SPACES)]
        loss = losses[(i // len(SPACES)) % len(losses)]
        if isinstance(space, Sphere):
            radius = rng.uniform(0.1, 0.49) * space.injectivity_radius
        else:
            radius = rng.uniform(0.2, 3.0) * space.length_scale
        center = _random_centers(space, 1, rng)[0]
        n = int(rng.integers(5, 16))
        pts = space.random_points_in_ball(center, radius, n, rng)
        out.append(_certify(ctx, space, pts, loss, n_starts=20))
    return out


def _c3_instances(ctx: Context, count: int = 100, others: int = 20) -> list[Instance]:
    rng = ctx.rng("uniqueness_c3")
    out = []
    sphere = SPACES[0]
    for _ in range(count):
        center = _random_centers(sphere, 1, rng)[0]
        n = int(rng.integers(5, 21))
        pts = fixtures.generate(sphere, "cap", n, 0.45 * math.pi, rng, center)
        out.append(_certify(ctx, sphere, pts, Lp(2.0)))
    for space in SPACES[1:]:
        for _ in range(others):
            n = int(rng.integers(5, 21))
            # heavy-tailed spread: no support restriction is needed here
            radii = space.length_scale * rng.exponential(1.5, n)
            dirs = space.random_tangent(np.broadcast_to(space.base_point(), (n, space.ambient_dim)), rng)
            pts = space.exp(space.base_point(), radii[:, None] * dirs)
            out.append(_certify(ctx, space, pts, Lp(2.0)))
    return out


def _c2_instances(ctx: Context, count: int = 100) -> list[Instance]:
    rng = ctx.rng("uniqueness_c2")
    sphere = SPACES[0]
    out = []
    for _ in range(count):
        center = _random_centers(sphere, 1, rng)[0]
        n = int(rng.integers(5, 21))
        pts = fixtures.generate(sphere, "cap", n, 0.9 * math.pi / 4, rng, center)
        out.append(_certify(ctx, sphere, pts, Huber(1.0)))
    return out


def _uniqueness_suite(ctx, name, key, clause):
    insts = ctx.instances(key)
    margins, hist, not_cert, clauses = [], {}, 0, set()
    for inst in insts:
        cert = inst.certificate
        count = cert.probe["cluster_count"]
        hist[str(count)] = hist.get(str(count), 0) + 1
        clauses.add(cert.theorem_clause)
        margins.append(-abs(count - 1))
        if cert.uniqueness != "guaranteed" or cert.theorem_clause != clause:
            not_cert += 1
    details = {"cluster_counts": dict(sorted(hist.items())), "not_certified": not_cert,
               "clauses": sorted(clauses)}
    passed = min(margins) >= 0 and not_cert == 0
    return _result(name, margins, len(insts), details, passed)


def suite_existence(ctx: Context) -> SuiteResult:
    """Every bundled loss on every space: some start converges, and the best
    value is below the risk at 1000 random points of a ball three times the
    data radius."""
    rng = ctx.rng("existence_probe")
    insts = ctx.instances("existence")
    margins, no_conv, worst_excess = [], 0, -math.inf
    for inst in insts:
        runs = inst.certificate.probe_result.runs
        good = [r for r in runs if r.converged and r.grad_norm <= GRAD_TOL]
        if not good:
            no_conv += 1
            margins.append(-1.0)
            continue
        best = min(r.value for r in good)
        space, ball = inst.space, inst.certificate.enclosing_ball
        radius = 3.0 * ball.radius
        if math.isfinite(space.injectivity_radius):
            radius = min(radius, 0.999 * space.injectivity_radius)
        probes = space.random_points_in_ball(ball.center, radius, 1000, rng)
        vals = []
        for x in probes:
            try:
                vals.append(risk(space, inst.sample, inst.loss, x))
            except CutLocusError:
                continue
        slack = 1e-12 * (1.0 + abs(best))
        excess = best - min(vals)
        worst_excess = max(worst_excess, excess)
        margins.append(slack - excess)
    details = {"instances_without_convergence": no_conv, "max_best_minus_probe_min": worst_excess}
    return _result("existence", margins, len(insts), details)


def suite_uniqueness_c3(ctx: Context) -> SuiteResult:
    """lp(2): one cluster in sphere caps of radius 0.45 pi and on spread
    hyperbolic/euclidean data."""
    return _uniqueness_suite(ctx, "uniqueness_c3", "uniqueness_c3", "Thm3b")


def suite_uniqueness_c2(ctx: Context) -> SuiteResult:
    """huber(1): one cluster in sphere caps of radius 0.9 pi / 4."""
    return _uniqueness_suite(ctx, "uniqueness_c2", "uniqueness_c2", "Thm3a")


def suite_containment(ctx: Context) -> SuiteResult:
    """Converged minimizers of certified instances lie within r0 of the ball center."""
    margins, trials, worst = [], 0, -math.inf
    for key in ("uniqueness_c3", "uniqueness_c2"):
        for inst in ctx.instances(key):
            cert = inst.certificate
            if not cert.A2_satisfied:
                continue
            radius = r0(inst.space, cert.loss_class)
            for run in cert.probe_result.runs:
                if not run.converged:
                    continue
                trials += 1
                d = float(inst.space.dist(cert.enclosing_ball.center, run.minimizer))
                excess = d - radius if math.isfinite(radius) else -math.inf
                worst = max(worst, excess)
                if math.isfinite(radius):
                    margins.append(CONTAINMENT_SLACK - excess)
    return _result("containment", margins or [math.inf], trials, {"max_excess_over_r0": worst})


# -- counterexamples ------------------------------------------------------------

def _counter_instances(ctx: Context) -> list[tuple[str, ManifoldSpace, WeightedSample, Loss, object]]:
    sphere = SPACES[0]
    params = ctx.solver()
    out = []
    sample = counterexample(sphere, "antipodal_pair")
    out.append(("antipodal_pair", sphere, sample, Lp(2.0),
                multi_start(sphere, sample, Lp(2.0), n_starts=50, params=params)))
    line = Euclidean(1)
    sample = counterexample(line, "collinear_median", n=2, spacing=1.0)
    out.append(("collinear_median", line, sample, Absolute(),
                multi_start(line, sample, Absolute(), n_starts=50, params=params)))
    sample = counterexample(sphere, "equator_mass", m=4)
    region = (sphere.base_point(), 0.95 * sphere.injectivity_radius)
    out.append(("equator_mass", sphere, sample, Lp(2.0),
                multi_start(sphere, sample, Lp(2.0), region=region, n_starts=50, params=params)))
    return out


def suite_counterexamples(ctx: Context) -> SuiteResult:
    """Non-unique minimizer sets are detected as several clusters."""
    expected = {"antipodal_pair": math.pi**2 / 4, "collinear_median": 0.5, "equator_mass": math.pi**2 / 4}
    details, margins = {}, []
    for kind, space, _sample, _loss, res in _counter_instances(ctx):
        values = [c.value for c in res.clusters]
        err = max(abs(v - expected[kind]) for v in values) if values else math.inf
        spread = res.max_intercluster_distance(space)
        details[kind] = {
            "clusters": res.cluster_count,
            "max_value_error": err,
            "max_intercluster_distance": spread,
        }
        margins.append(res.cluster_count - 2)
        margins.append(COUNTER_VALUE_TOL - err)
        if kind == "equator_mass":
            margins.append(spread - 1.0)
    return _result("counterexamples", margins, 3, details)


# -- Hessian comparison ----------------------------------------------------------

def suite_hessian(ctx: Context, trials: int = 1000) -> SuiteResult:
    """Second derivative of distance along geodesics against the curvature bound."""
    rng = ctx.rng("hessian")
    details, margins = {}, []
    for space in SPACES:
        radius = 0.2 * math.pi * space.length_scale if isinstance(space, Sphere) else 3.0 * space.length_scale
        center = _random_centers(space, 1, rng)[0]
        worst, worst_eq, skipped = math.inf, 0.0, 0
        for _ in range(trials):
            p, q, x = space.random_points_in_ball(center, radius, 3, rng)
            t = float(rng.random())
            chk = hessian_comparison_check(space, x, p, q, t, tol=HESSIAN_TOL)
            if chk.skipped:
                skipped += 1
                continue
            slack = chk.lhs - chk.rhs + HESSIAN_TOL
            worst = min(worst, slack)
            margins.append(slack)
            if isinstance(space, Euclidean):
                eq = abs(chk.lhs - chk.rhs)
                worst_eq = max(worst_eq, eq)
                margins.append(HESSIAN_EQ_TOL - eq)
        details[space.spec()] = {"min_slack": worst, "skipped": skipped}
        if isinstance(space, Euclidean):
            details[space.spec()]["max_equality_error"] = worst_eq
    return _result("hessian", margins, trials * len(SPACES), details)


# -- oracles ----------------------------------------------------------------------

def weiszfeld_oracle(points, weights, max_iter: int = 200_000, tol: float = 1e-15) -> np.ndarray:
    """Classical Weiszfeld iteration for the Euclidean weighted geometric median."""
    x = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    y = w @ x / w.sum()
    for _ in range(max_iter):
        d = np.linalg.norm(x - y, axis=1)
        if np.any(d == 0):
            break
        c = w / d
        y_new = c @ x / c.sum()
        if np.linalg.norm(y_new - y) <= tol * (1.0 + np.linalg.norm(y)):
            y = y_new
            break
        y = y_new
    return y


def _lat_lon(x):
    return np.arcsin(np.clip(x[..., 2], -1.0, 1.0)), np.arctan2(x[..., 1], x[..., 0])


def grid_oracle_s2(points, weights, loss, center, radius, coarse=1e-2, fine=1e-3) -> float:
    """Minimum of sum_i w_i rho(d_i) over the unit sphere by latitude/longitude grids.

    Distances use the haversine formula on (lat, lon). A coarse grid covers
    the cap around ``center``; the best node is refined by a ``fine`` grid and
    then by grids ten times finer each, down to ``1e-4 * fine``.
    """
    lat_i, lon_i = _lat_lon(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float)

    def value(lat, lon):
        dlat = lat[..., None] - lat_i
        dlon = lon[..., None] - lon_i
        a = np.sin(dlat / 2) ** 2 + np.cos(lat[..., None]) * np.cos(lat_i) * np.sin(dlon / 2) ** 2
        d = 2.0 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
        return np.sum(w * loss.rho(d), axis=-1)

    clat, clon = _lat_lon(np.asarray(center, dtype=float))
    span_lat = radius + 2 * coarse
    span_lon = min(math.pi, span_lat / max(math.cos(min(abs(clat) + span_lat, 1.55)), 1e-2))
    lat = np.clip(np.arange(clat - span_lat, clat + span_lat, coarse), -math.pi / 2, math.pi / 2)
    lon = np.arange(clon - span_lon, clon + span_lon, coarse)
    best = (math.inf, clat, clon)
    step = coarse
    while True:
        L, G = np.meshgrid(lat, lon, indexing="ij")
        v = value(L, G)
        k = np.unravel_index(int(np.argmin(v)), v.shape)
        if v[k] < best[0]:
            best = (float(v[k]), float(L[k]), float(G[k]))
        if step <= fine * 1e-4:
            break
        # zoom: +-2 old steps around the best node at a tenth of the step
        step = fine if step == coarse else step / 10.0
        lat = best[1] + np.arange(-20, 21) * step
        lon = best[2] + np.arange(-20, 21) * step
        lat = lat[np.abs(lat) <= math.pi / 2]
    return best[0]


def suite_oracles(ctx: Context, instances: int = 20) -> SuiteResult:
    """Solver output against closed forms and independent algorithms."""
    rng = ctx.rng("oracles")
    params = ctx.solver(max_iters=5000)
    margins, details = [], {}

    space = Euclidean(3)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(3, 20))
        pts = rng.normal(0.0, 2.0, (n, 3))
        w = rng.random(n) + 0.1
        sample = WeightedSample(pts, w)
        res = minimize_rgd(space, sample, Lp(2.0), rng.normal(0.0, 5.0, 3), params)
        err = float(np.linalg.norm(res.minimizer - sample.weights @ sample.points))
        worst = max(worst, err)
        margins.append(MEAN_TOL - err if res.converged else -1.0)
    details["euclidean_lp2_vs_mean"] = worst

    space = Euclidean(2)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(3, 20))
        pts = rng.normal(0.0, 1.0, (n, 2))
        w = rng.random(n) + 0.1
        sample = WeightedSample(pts, w)
        ms = multi_start(space, sample, Absolute(), n_starts=5, params=params)
        oracle = weiszfeld_oracle(sample.points, sample.weights)
        err = float(np.linalg.norm(ms.best().minimizer - oracle))
        worst = max(worst, err)
        margins.append(WEISZFELD_TOL - err)
    details["euclidean_abs_vs_weiszfeld"] = worst

    sphere = Sphere(2)
    worst = 0.0
    for _ in range(instances // 2):
        center = _random_centers(sphere, 1, rng)[0]
        n = int(rng.integers(5, 21))
        radius = math.pi / 8
        pts = fixtures.generate(sphere, "cap", n, radius, rng, center)
        w = rng.random(n) + 0.1
        sample = WeightedSample(pts, w)
        res = minimize_rgd(sphere, sample, Lp(2.0), center, params)
        oracle = grid_oracle_s2(sample.points, sample.weights, Lp(2.0), center, radius)
        err = abs(res.value - oracle)
        worst = max(worst, err)
        margins.append(GRID_VALUE_TOL - err if res.converged else -1.0)
    details["sphere_lp2_vs_grid"] = worst
    return _result("oracles", margins, 2 * instances + instances // 2, details)


# -- soundness ----------------------------------------------------------------------

def suite_soundness(ctx: Context) -> SuiteResult:
    """No certified instance shows more than one probe cluster."""
    trials, certified, bad = 0, 0, 0
    for key in ("existence", "uniqueness_c3", "uniqueness_c2"):
        for inst in ctx.instances(key):
            trials += 1
            cert = inst.certificate
            if cert.uniqueness == "guaranteed":
                certified += 1
                if cert.probe["cluster_count"] != 1:
                    bad += 1
    for _kind, space, sample, loss, res in _counter_instances(ctx):
        trials += 1
        cert = build_certificate(space, sample, loss, ProbeParams(solver=ctx.solver()), probe_result=res)
        if cert.uniqueness == "guaranteed":
            certified += 1
            if res.cluster_count != 1:
                bad += 1
    details = {"certified": certified, "certified_with_multiple_clusters": bad}
    return _result("soundness", [-bad], trials, details)


SUITES = {
    "geometry": suite_geometry,
    "gradient": suite_gradient,
    "lemma2": suite_lemma2,
    "existence": suite_existence,
    "uniqueness_c3": suite_uniqueness_c3,
    "uniqueness_c2": suite_uniqueness_c2,
    "containment": suite_containment,
    "counterexamples": suite_counterexamples,
    "hessian": suite_hessian,
    "oracles": suite_oracles,
    "soundness": suite_soundness,
}

SUITE_IDS = {name: i for i, name in enumerate(list(SUITES) + ["existence_probe"])}

INSTANCE_BUILDERS = {
    "existence": _existence_instances,
    "uniqueness_c3": _c3_instances,
    "uniqueness_c2": _c2_instances,
}


def run_suites(seed: int = 0, names=None) -> list[SuiteResult]:
    """Run the named suites (all by default) in registry order."""
    names = list(SUITES) if names is None else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    ctx = Context(seed)
    return [SUITES[n](ctx) for n in SUITES if n in names]


def build_report(results: list[SuiteResult], seed: int) -> dict:
    return {
        "seed": int(seed),
        "passed": all(r.passed for r in results),
        "suites": [r.to_dict() for r in results],
    }
