"""Minimizers of the empirical objective: RGD, Weiszfeld-type IRLS and multi-start."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import objective as obj_mod
from .exceptions import (
    CutLocusError,
    DegenerateWeightsError,
    DomainError,
    UnsupportedLossError,
    ValidationError,
)
from .geometry import ManifoldSpace
from .losses import Loss, LossClass
from .objective import WeightedSample, descent_direction

MAX_HALVINGS = 60
#: step lengths are capped at this fraction of the injectivity radius
STEP_CAP = 0.49
CLUSTER_THRESHOLD = 1e-5

STREAMS = {"starts": 1, "fixtures": 2, "probes": 3}


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named random stream under a root seed."""
    return np.random.default_rng([int(seed), STREAMS[name]])


@dataclass(frozen=True)
class SolverParams:
    max_iters: int = 500
    grad_tol: float = 1e-9
    step_tol: float = 1e-12
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    irls_damping: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValidationError("max_iters must be >= 0")
        if not self.grad_tol > 0 or not self.step_tol >= 0:
            raise ValidationError("tolerances must be positive")
        if not 0 < self.armijo_c < 1:
            raise ValidationError("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValidationError("backtrack_factor must lie in (0, 1)")
        if not self.initial_step > 0:
            raise ValidationError("initial_step must be positive")
        if not 0 < self.irls_damping <= 1:
            raise ValidationError("irls_damping must lie in (0, 1]")


@dataclass
class EstimateResult:
    minimizer: np.ndarray
    value: float
    grad_norm: float
    iters: int
    status: str
    trace: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _failed(init, trace_value=math.inf):
    return EstimateResult(np.asarray(init, dtype=float), trace_value, math.inf, 0, "stalled", [])


def _accept(value, stat, res, cand_value, cand_stat, cand_res, decrease):
    """Sufficient decrease test that stays meaningful at the round-off of ``F``.

    A candidate passes if ``F`` drops by ``decrease``. When ``decrease`` is
    below the resolution of ``F`` that comparison is noise, so the candidate
    must instead keep ``F`` within round-off and lower the stationarity.
    """
    slack = max(res, cand_res)
    if decrease > slack and cand_value <= value - decrease:
        return True
    return cand_value <= value + slack and cand_stat < stat


def _step_cap(space):
    r = space.injectivity_radius
    return STEP_CAP * r if math.isfinite(r) else math.inf


def _try_eval(space, sample, loss, m):
    try:
        return obj_mod.evaluate(space, sample, loss, m)
    except CutLocusError:
        return None


def minimize_rgd(
    space: ManifoldSpace,
    sample: WeightedSample,
    loss: Loss,
    init,
    params: SolverParams | None = None,
) -> EstimateResult:
    """Riemannian gradient descent with Armijo backtracking.

    Update ``m <- exp_m(-alpha g)``, ``g`` the minimal-norm subgradient, with
    ``alpha`` halved from ``initial_step`` until the Armijo condition holds.
    Near a minimizer, where the Armijo decrease is below the round-off of
    ``F``, a step is also accepted if ``F`` does not grow beyond that round-off
    and the stationarity measure decreases.

    Two safeguards keep the iteration from crawling:

    * when the quadratic through ``F(0)``, ``F'(0)`` and the accepted
      ``F(alpha)`` puts its minimum well short of ``alpha``, that step is tried
      too and kept if it is acceptable and better;
    * for losses with ``rho'(0+) > 0`` an iteration first tries to jump onto
      the nearest sample point once the iterate is within a few steps of it,
      so minimizers located at data points are reached exactly.
    """
    return rgd_batch(space, sample, loss, [init], params)[0]


_START, _SEARCH, _SNAP, _REFINE = range(4)


class _Point:
    """An evaluated iterate (one row of a batched evaluation)."""

    __slots__ = ("x", "value", "stat", "res", "grad", "gnorm", "dists")

    def __init__(self, x, ev, a):
        self.x = x
        self.value = float(ev.value[a])
        self.stat = float(ev.stationarity[a])
        self.res = float(ev.value_resolution[a])
        self.grad = ev.grad[a]
        self.gnorm = float(ev.grad_norm[a])
        self.dists = ev.dists[a]


def rgd_batch(space, sample, loss, inits, params: SolverParams | None = None) -> list[EstimateResult]:
    """Run :func:`minimize_rgd` from every init in lockstep.

    Each run keeps its own step size and line search; only the objective
    evaluations are shared, one batched call per round. Results are identical
    to running the starts one at a time.
    """
    params = params or SolverParams()
    starts = np.array([space.validate(x) for x in inits], dtype=float)
    k = starts.shape[0]
    cap = _step_cap(space)
    snap = loss.slope_at_zero > 0
    atom_tol = obj_mod.ATOM_TOL * space.length_scale

    ev0 = obj_mod.evaluate_batch(space, sample, loss, starts)
    cur = [_Point(starts[i].copy(), ev0, i) for i in range(k)]
    status: list[str | None] = [None if ev0.cut_index[i] < 0 else "init_cut" for i in range(k)]
    traces = [[(0, p.value, p.stat, 0.0)] for p in cur]
    iters = [0] * k
    phase = [_START] * k
    alpha = [0.0] * k
    halvings = [0] * k
    direction = [None] * k
    dnorm = [0.0] * k
    last_step = [math.inf] * k
    target = [0] * k
    pending: list[tuple | None] = [None] * k

    def commit(i, point, step, searched):
        cur[i] = point
        traces[i].append((iters[i], point.value, point.stat, step))
        last_step[i] = step
        phase[i] = _START
        if searched and step < params.step_tol and point.stat > params.grad_tol:
            status[i] = "stalled"

    while True:
        for i in range(k):
            if status[i] is not None or phase[i] != _START:
                continue
            c = cur[i]
            if c.stat <= params.grad_tol:
                status[i] = "converged"
                continue
            if iters[i] >= params.max_iters:
                status[i] = "max_iters"
                continue
            iters[i] += 1
            direction[i] = -c.grad * (c.stat / c.gnorm)
            dnorm[i] = c.stat
            alpha[i] = min(params.initial_step, cap / dnorm[i])
            halvings[i] = 0
            phase[i] = _SEARCH
            if snap:
                j = int(np.argmin(c.dists))
                if atom_tol < c.dists[j] <= 4.0 * last_step[i]:
                    target[i] = j
                    phase[i] = _SNAP
        rows = [i for i in range(k) if status[i] is None]
        if not rows:
            break
        moving = [i for i in rows if phase[i] != _SNAP]
        cand = np.empty((len(rows), starts.shape[1]))
        if moving:
            base = np.array([cur[i].x for i in moving])
            steps = np.array([alpha[i] * direction[i] for i in moving])
            cand[[rows.index(i) for i in moving]] = space.exp(base, steps)
        for a, i in enumerate(rows):
            if phase[i] == _SNAP:
                cand[a] = sample.points[target[i]]
        ev = obj_mod.evaluate_batch(space, sample, loss, cand)

        for a, i in enumerate(rows):
            c = cur[i]
            valid = ev.cut_index[a] < 0
            trial = _Point(cand[a], ev, a) if valid else None
            if phase[i] == _SNAP:
                if valid and trial.value <= c.value:
                    commit(i, trial, float(c.dists[target[i]]), False)
                else:
                    phase[i] = _SEARCH
                continue
            ok = valid and _accept(
                c.value, c.stat, c.res, trial.value, trial.stat, trial.res,
                params.armijo_c * alpha[i] * dnorm[i] ** 2,
            )
            if phase[i] == _REFINE:
                best, best_alpha = pending[i]
                if ok and trial.value < best.value:
                    best, best_alpha = trial, alpha[i]
                pending[i] = None
                commit(i, best, best_alpha * dnorm[i], True)
                continue
            if not ok:
                alpha[i] *= params.backtrack_factor
                halvings[i] += 1
                if halvings[i] > MAX_HALVINGS:
                    status[i] = "stalled"
                continue
            shorter = _interpolated_step(c.value, -dnorm[i] ** 2, alpha[i], trial.value, c.res)
            if shorter is not None:
                pending[i] = (trial, alpha[i])
                alpha[i] = shorter
                phase[i] = _REFINE
                continue
            commit(i, trial, alpha[i] * dnorm[i], True)

    out = []
    for i in range(k):
        if status[i] == "init_cut":
            out.append(_failed(cur[i].x))
        else:
            c = cur[i]
            out.append(EstimateResult(c.x, c.value, c.stat, iters[i], status[i], traces[i]))
    return out


def _interpolated_step(f0, slope, alpha, f1, res):
    """Minimizer of the quadratic through (0, f0) with slope ``slope`` and
    (alpha, f1), if it lies clearly short of ``alpha``; else ``None``."""
    curv = f1 - f0 - slope * alpha
    if not curv > 4.0 * res:
        return None
    star = -slope * alpha * alpha / (2.0 * curv)
    if 0.1 * alpha <= star <= 0.75 * alpha:
        return star
    return None


def minimize_irls(
    space: ManifoldSpace,
    sample: WeightedSample,
    loss: Loss,
    init,
    params: SolverParams | None = None,
) -> EstimateResult:
    """Weiszfeld-type fixed-point iteration for convex (C2/C3) losses.

    ``m <- exp_m(damping * sum_i w_i omega_i Log_m(x_i) / sum_i w_i omega_i)``
    with ``omega_i = rho'(d_i)/d_i``. Atoms at ``m`` with infinite weight
    (absolute loss) are excluded. Steps that increase ``F`` are halved.
    """
    params = params or SolverParams()
    if loss.declared_class == LossClass.C1ONLY:
        raise UnsupportedLossError(f"IRLS needs a C2 or C3 loss, got {loss.spec()}")
    m = space.validate(init)
    cur = _try_eval(space, sample, loss, m)
    if cur is None:
        return _failed(m)
    trace = [(0, cur.value, cur.stationarity, 0.0)]
    cap = _step_cap(space)
    status = "max_iters"
    it = 0
    w = sample.weights
    while True:
        if cur.stationarity <= params.grad_tol:
            status = "converged"
            break
        if it >= params.max_iters:
            break
        it += 1
        d = space.dist(m, sample.points)
        omega = loss.weight(d)
        keep = np.isfinite(omega)
        coef = np.where(keep, w * np.where(keep, omega, 0.0), 0.0)
        total = coef.sum()
        if not total > 0:
            raise DegenerateWeightsError("all IRLS weights are zero")
        logs = space.log(m, sample.points)
        direction = space.proj(m, np.sum(coef[:, None] * logs, axis=0) / total)
        dnorm = float(space.norm(m, direction))
        if dnorm == 0.0:
            status = "stalled"
            break
        alpha = min(params.irls_damping, cap / dnorm)
        accepted = None
        for _ in range(MAX_HALVINGS + 1):
            cand_m = space.exp(m, alpha * direction)
            cand = _try_eval(space, sample, loss, cand_m)
            if cand is not None and _accept(
                cur.value, cur.stationarity, cur.value_resolution,
                cand.value, cand.stationarity, cand.value_resolution, 0.0,
            ):
                accepted = cand
                break
            alpha *= 0.5
        if accepted is None:
            status = "stalled"
            break
        step = alpha * dnorm
        m, cur = cand_m, accepted
        trace.append((it, cur.value, cur.stationarity, step))
        if step < params.step_tol and cur.stationarity > params.grad_tol:
            status = "stalled"
            break
    return EstimateResult(m, cur.value, cur.stationarity, it, status, trace)


# -- multi-start -------------------------------------------------------------

@dataclass
class Cluster:
    members: list[int]
    representative: int
    point: np.ndarray
    value: float


@dataclass
class MultiStartResult:
    runs: list[EstimateResult]
    clusters: list[Cluster]
    region: tuple

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)

    @property
    def n_converged(self) -> int:
        return sum(r.converged for r in self.runs)

    def best(self) -> EstimateResult | None:
        if not self.clusters:
            return None
        c = min(self.clusters, key=lambda c: (c.value, c.representative))
        return self.runs[c.representative]

    def max_intercluster_distance(self, space: ManifoldSpace) -> float:
        if len(self.clusters) < 2:
            return 0.0
        pts = np.array([c.point for c in self.clusters])
        return float(np.max(space.dist(pts[:, None, :], pts[None, :, :])))


def cluster_minimizers(space, runs, threshold=CLUSTER_THRESHOLD) -> list[Cluster]:
    """Single-linkage clusters of the converged runs' minimizers."""
    idx = [i for i, r in enumerate(runs) if r.converged]
    parent = {i: i for i in idx}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if idx:
        pts = np.array([runs[i].minimizer for i in idx])
        close = space.dist(pts[:, None, :], pts[None, :, :]) < threshold
        for a, b in zip(*np.nonzero(np.triu(close, 1))):
            ri, rj = find(idx[a]), find(idx[b])
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in idx:
        groups.setdefault(find(i), []).append(i)
    clusters = []
    for members in groups.values():
        rep = min(members, key=lambda i: (runs[i].value, i))
        clusters.append(Cluster(members, rep, runs[rep].minimizer, runs[rep].value))
    clusters.sort(key=lambda c: c.representative)
    return clusters


def default_region(space: ManifoldSpace, sample: WeightedSample) -> tuple:
    """Minimal enclosing ball of the data, or a ball around the first point."""
    from .certify import minimal_enclosing_ball

    try:
        ball = minimal_enclosing_ball(space, sample)
        return ball.center, ball.radius
    except DomainError:
        x0 = sample.points[0]
        r = float(np.max(space.dist(x0, sample.points)))
        return x0, min(r, 0.99 * space.injectivity_radius)


def start_points(space, sample, region, n_starts, seed) -> list[np.ndarray]:
    """``n_starts`` seeded random points of ``region`` followed by every data point."""
    center, radius = region
    center = space.validate(center)
    rng = stream(seed, "starts")
    starts = []
    for _ in range(n_starts):
        if radius > 0:
            starts.append(space.random_point_in_ball(center, radius, rng))
        else:
            starts.append(center.copy())
    starts.extend(np.array(x) for x in sample.points)
    return starts


def multi_start(
    space: ManifoldSpace,
    sample: WeightedSample,
    loss: Loss,
    region: tuple | None = None,
    n_starts: int = 50,
    params: SolverParams | None = None,
    inits=(),
    executor=None,
) -> MultiStartResult:
    """Run :func:`minimize_rgd` from many starts and cluster the minimizers.

    Starts are ``inits`` (explicit), then ``n_starts`` random points of
    ``region = (center, radius)`` and then every data point. ``executor`` (a
    ``concurrent.futures.Executor``) parallelizes the runs; results are kept
    in start order either way.
    """
    if n_starts < 1:
        raise ValidationError("n_starts must be >= 1")
    params = params or SolverParams()
    if region is None:
        region = default_region(space, sample)
    if not region[1] < space.injectivity_radius:
        raise DomainError("region radius must be below the injectivity radius")
    starts = [space.validate(x) for x in inits]
    starts += start_points(space, sample, region, n_starts, params.seed)

    if executor is None:
        runs = rgd_batch(space, sample, loss, starts, params)
    else:
        runs = list(executor.map(lambda x: minimize_rgd(space, sample, loss, x, params), starts))
    return MultiStartResult(runs, cluster_minimizers(space, runs), region)


def with_overrides(params: SolverParams, **kw) -> SolverParams:
    return replace(params, **{k: v for k, v in kw.items() if v is not None})
