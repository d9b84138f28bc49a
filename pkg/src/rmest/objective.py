"""Empirical M-estimation objective F(m) = sum_i w_i rho(d(x_i, m)) and its gradient."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CutLocusError, ValidationError
from .geometry import CUT_TOL, ManifoldSpace, Sphere
from .losses import Loss

#: sample points closer than this (relative to the length scale) coincide with m
ATOM_TOL = 1e-14


@dataclass(frozen=True)
class WeightedSample:
    """n points of one model space with non-negative weights summing to 1."""

    points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        n = pts.shape[0]
        if n < 1:
            raise ValidationError("a sample needs at least one point")
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if w.shape[0] != n:
                raise ValidationError(f"{w.shape[0]} weights for {n} points")
            if np.any(~(w >= 0)) or not np.all(np.isfinite(w)):
                raise ValidationError("weights must be finite and non-negative")
            total = w.sum()
            if total <= 0:
                raise ValidationError("weights must not all be zero")
            w = w / total
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, space: ManifoldSpace, points, weights=None) -> "WeightedSample":
        """Validate (and renormalize) ``points`` on ``space`` before wrapping them."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(space.validate(pts), weights)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class ObjectiveValue:
    """Objective and Riemannian gradient at one point.

    ``stationarity`` is the norm of the minimal-norm element of the
    subdifferential. It equals ``grad_norm`` unless ``m`` sits on sample atoms
    of a loss with ``rho'(0+) > 0``. Atoms at ``m`` are counted in
    ``n_coincident`` and left out of ``grad``.
    """

    value: float
    grad: np.ndarray
    grad_norm: float
    n_coincident: int
    stationarity: float
    value_resolution: float


def _cut_limit(space):
    if isinstance(space, Sphere):
        return space.injectivity_radius - CUT_TOL * space.radius
    return math.inf


def _distances(space, sample, m):
    d = space.dist(m, sample.points)
    bad = np.nonzero(d >= _cut_limit(space))[0]
    if bad.size:
        i = int(bad[0])
        raise CutLocusError(f"sample point {i} is at the cut locus of m", index=i)
    return d


def risk(space: ManifoldSpace, sample: WeightedSample, loss: Loss, m) -> float:
    """F(m) = sum_i w_i rho(d(x_i, m))."""
    d = _distances(space, sample, np.asarray(m, dtype=float))
    return float(np.sum(sample.weights * loss.rho(d)))


@dataclass(frozen=True)
class BatchObjective:
    """Column-wise :class:`ObjectiveValue` for k evaluation points.

    Rows whose point has a sample atom at its cut locus carry ``cut_index >= 0``,
    ``value = inf`` and a zero gradient.
    """

    value: np.ndarray
    grad: np.ndarray
    grad_norm: np.ndarray
    n_coincident: np.ndarray
    stationarity: np.ndarray
    value_resolution: np.ndarray
    dists: np.ndarray
    cut_index: np.ndarray

    def row(self, i: int) -> ObjectiveValue:
        if self.cut_index[i] >= 0:
            j = int(self.cut_index[i])
            raise CutLocusError(f"sample point {j} is at the cut locus of m", index=j)
        return ObjectiveValue(
            float(self.value[i]),
            self.grad[i],
            float(self.grad_norm[i]),
            int(self.n_coincident[i]),
            float(self.stationarity[i]),
            float(self.value_resolution[i]),
        )


def evaluate_batch(space: ManifoldSpace, sample: WeightedSample, loss: Loss, ms) -> BatchObjective:
    """Objective, gradient and stationarity at each row of ``ms`` (shape (k, D))."""
    ms = np.atleast_2d(np.asarray(ms, dtype=float))
    k = ms.shape[0]
    w = sample.weights
    d = space.dist(ms[:, None, :], sample.points[None, :, :])
    hit = d >= _cut_limit(space)
    cut = np.any(hit, axis=1)
    cut_index = np.where(cut, np.argmax(hit, axis=1), -1)
    ok = ~cut

    value = np.full(k, math.inf)
    grad = np.zeros_like(ms)
    gnorm = np.zeros(k)
    n_coincident = np.zeros(k, dtype=int)
    stationarity = np.full(k, math.inf)
    resolution = np.zeros(k)
    if np.any(ok):
        dk = d[ok]
        mk = ms[ok]
        rho = loss.rho(dk)
        value[ok] = np.sum(w * rho, axis=-1)
        atoms = dk <= ATOM_TOL * space.length_scale
        slope = loss.d1(dk)
        coef = np.where(atoms, 0.0, w * slope / np.where(atoms, 1.0, dk))
        logs = space.log(mk[:, None, :], sample.points[None, :, :])
        g = space.proj(mk, -np.sum(coef[..., None] * logs, axis=-2))
        gn = space.norm(mk, g)
        grad[ok] = g
        gnorm[ok] = gn
        st = gn
        n_coincident[ok] = np.count_nonzero(atoms, axis=-1)
        slope0 = loss.slope_at_zero
        if slope0 > 0:
            # the atoms' subdifferential is a ball of radius (their weight) * rho'(0+)
            st = np.maximum(0.0, gn - np.sum(np.where(atoms, w, 0.0), axis=-1) * slope0)
        stationarity[ok] = st
        resolution[ok] = 64.0 * np.finfo(float).eps * np.sum(
            w * (np.abs(rho) + np.abs(slope) * (dk + space.length_scale)), axis=-1
        )
    return BatchObjective(value, grad, gnorm, n_coincident, stationarity, resolution, d, cut_index)


def evaluate(space: ManifoldSpace, sample: WeightedSample, loss: Loss, m) -> ObjectiveValue:
    """Objective value, gradient and stationarity measure at ``m`` in one pass."""
    m = np.asarray(m, dtype=float)
    return evaluate_batch(space, sample, loss, m[None, :]).row(0)


def riemannian_gradient(space: ManifoldSpace, sample: WeightedSample, loss: Loss, m) -> np.ndarray:
    """grad F(m) = -sum_i w_i rho'(d_i) Log_m(x_i) / d_i (coincident atoms contribute 0)."""
    return evaluate(space, sample, loss, m).grad


def descent_direction(obj: ObjectiveValue) -> np.ndarray:
    """Negative minimal-norm subgradient."""
    if obj.grad_norm == 0.0:
        return np.zeros_like(obj.grad)
    return -obj.grad * (obj.stationarity / obj.grad_norm)


def second_derivative_along(
    space: ManifoldSpace, sample: WeightedSample, loss: Loss, p, q, t: float, rel_step: float = 1e-4
) -> float:
    """Second central difference of ``s -> F(gamma(s))`` at ``s = t``.

    ``gamma`` is the minimal geodesic from ``p`` (s=0) to ``q`` (s=1), so the
    result is in units of the [0, 1] parameter. Returns ``nan`` when the probe
    is skipped: a sample atom lies within two steps of ``gamma(t)`` or a
    distance falls within two steps of the loss's exception set.
    """
    p = np.asarray(p, dtype=float)
    v = space.log(p, q)
    length = float(space.norm(p, v))
    h = rel_step
    pts = space.exp(p, np.array([t - h, t, t + h])[:, None] * v)
    guard = 2.0 * h * length
    dmid = space.dist(pts[1], sample.points)
    if np.any(dmid <= guard):
        return math.nan
    for s in loss.exception_set:
        if np.any(np.abs(dmid - s) <= guard):
            return math.nan
    f = [risk(space, sample, loss, x) for x in pts]
    return (f[0] - 2.0 * f[1] + f[2]) / (h * h)
