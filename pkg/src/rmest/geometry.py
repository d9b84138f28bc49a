"""Constant-curvature model spaces with closed-form geodesic primitives.

Points and tangent vectors are plain ``numpy`` arrays in ambient coordinates:

* ``Euclidean(dim)``: points in R^dim.
* ``Sphere(dim, radius)``: points in R^(dim+1) with norm ``radius``.
* ``Hyperbolic(dim, kappa)``: hyperboloid model, points in R^(dim+1) with
  Minkowski norm <x, x>_L = -1/kappa and x[0] > 0.

Every primitive broadcasts over leading axes, so ``space.dist(p, X)`` with
``X`` of shape ``(n, D)`` returns ``n`` distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import CutLocusError, DomainError, ValidationError

INF = math.inf

#: inputs whose constraint residual is below this are projected back
RENORMALIZE_TOL = 1e-6
#: tangency residual tolerated by ``exp``
TANGENT_TOL = 1e-9
#: distances within this (times the radius) of pi*R are treated as cut points
CUT_TOL = 1e-9


def sn_delta(s, delta: float):
    """Generalized sine of a model space with curvature ``delta``.

    ``sin(s*sqrt(delta))/sqrt(delta)`` for positive curvature, ``s`` when flat and
    ``sinh(s*sqrt(-delta))/sqrt(-delta)`` for negative curvature.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("sn_delta requires s >= 0")
    if delta > 0:
        k = math.sqrt(delta)
        out = np.sin(s * k) / k
    elif delta < 0:
        k = math.sqrt(-delta)
        out = np.sinh(s * k) / k
    else:
        out = s.copy()
    return out[()] if out.ndim == 0 else out


def sn_ratio(s, delta: float):
    """Return ``sn_delta'(s) / sn_delta(s)`` for ``s > 0``."""
    s = np.asarray(s, dtype=float)
    if delta > 0:
        k = math.sqrt(delta)
        out = k / np.tan(s * k)
    elif delta < 0:
        k = math.sqrt(-delta)
        out = k / np.tanh(s * k)
    else:
        out = 1.0 / s
    out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def _sinc(x):
    """sin(x)/x, safe at zero."""
    return np.sinc(np.asarray(x) / np.pi)


def _sinhc(x):
    """sinh(x)/x, safe at zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(xs) / xs)


def _norm(v):
    return np.sqrt(np.einsum("...i,...i->...", v, v))


@dataclass(frozen=True)
class ManifoldSpace:
    """Base class of the bundled model geometries.

    Subclasses provide ``kind``, the ambient dimension and the closed-form
    ``dist``/``log``/``exp`` maps.
    """

    dim: int

    kind = "abstract"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValidationError(f"dim must be a positive integer, got {self.dim!r}")

    # -- constants -------------------------------------------------------
    @property
    def scale(self) -> float:
        return 1.0

    @property
    def length_scale(self) -> float:
        """Natural unit of length, used to make tolerances scale-free."""
        return 1.0

    @property
    def curvature(self) -> float:
        """Least upper bound of the sectional curvature."""
        raise NotImplementedError

    @property
    def injectivity_radius(self) -> float:
        return INF

    @property
    def ambient_dim(self) -> int:
        return self.dim

    def spec(self) -> str:
        """Textual spec understood by :func:`parse_space`."""
        return f"{self.kind}:dim={self.dim},scale={self.scale!r}"

    # -- interface ---------------------------------------------------------
    def validate(self, x) -> np.ndarray:
        """Check representation constraints, projecting small residuals away."""
        raise NotImplementedError

    def base_point(self) -> np.ndarray:
        raise NotImplementedError

    def inner(self, p, u, v):
        """Riemannian inner product of tangent vectors at ``p``."""
        return np.sum(u * v, axis=-1)

    def norm(self, p, v):
        return np.sqrt(np.maximum(self.inner(p, v, v), 0.0))

    def proj(self, p, v):
        """Orthogonal projection of an ambient vector onto ``T_p``."""
        return np.asarray(v, dtype=float)

    def dist(self, p, q):
        raise NotImplementedError

    def log(self, p, q):
        raise NotImplementedError

    def exp(self, p, v):
        """Endpoint of the geodesic from ``p`` with initial velocity ``v``.

        Raises :class:`ValidationError` if ``v`` is not tangent at ``p``.
        """
        raise NotImplementedError

    def distance_to_geodesic(self, a, b, x):
        """Distance from ``x`` to the complete geodesic through ``a`` and ``b``."""
        raise NotImplementedError

    def geodesic_velocity(self, p, e, s):
        """Velocity at arclength ``s`` of the unit-speed geodesic ``exp_p(s e)``."""
        raise NotImplementedError

    # -- derived operations ------------------------------------------------
    def geodesic_point(self, p, q, t):
        """Point at fraction ``t`` of the minimal geodesic from ``p`` to ``q``.

        Values of ``t`` outside [0, 1] extend the geodesic.
        """
        p = np.asarray(p, dtype=float)
        v = self.log(p, q)
        t = np.asarray(t, dtype=float)
        if t.ndim:
            t = t[..., None]
        return self.exp(p, t * v)

    def check_tangent(self, p, v) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        resid = np.abs(self._tangency(p, v))
        bound = TANGENT_TOL * (1.0 + _norm(p) * _norm(v))
        if np.any(resid > bound):
            raise ValidationError(
                f"vector is not tangent at the base point (residual {float(np.max(resid)):.3e})"
            )
        return self.proj(p, v)

    def _tangency(self, p, v):
        return np.zeros(np.broadcast_shapes(p.shape, v.shape)[:-1])

    def random_tangent(self, p, rng) -> np.ndarray:
        """Uniformly distributed unit tangent direction at ``p``."""
        p = np.asarray(p, dtype=float)
        while True:
            v = self.proj(p, rng.standard_normal(p.shape))
            n = self.norm(p, v)
            if np.all(n > 1e-8):
                return v / np.asarray(n)[..., None]

    def random_point_in_ball(self, center, radius: float, seed=None) -> np.ndarray:
        """Random point of the open geodesic ball ``B_radius(center)``.

        The tangent vector is drawn uniformly from the tangent ball of the
        same radius and mapped through ``exp``. ``seed`` may be an integer or
        a ``numpy.random.Generator``.
        """
        return self.random_points_in_ball(center, radius, 1, seed)[0]

    def random_points_in_ball(self, center, radius: float, n: int, seed=None) -> np.ndarray:
        """``n`` independent draws of :meth:`random_point_in_ball`, shape (n, D)."""
        if not (0 < radius < self.injectivity_radius):
            raise DomainError(
                f"radius must lie in (0, {self.injectivity_radius}), got {radius}"
            )
        rng = np.random.default_rng(seed)
        center = self.validate(center)
        e = self.random_tangent(np.broadcast_to(center, (n, center.shape[-1])), rng)
        s = radius * rng.random(n) ** (1.0 / self.dim) * (1.0 - 1e-12)
        return self.exp(center, s[:, None] * e)


@dataclass(frozen=True)
class Euclidean(ManifoldSpace):
    kind = "euclidean"

    @property
    def curvature(self) -> float:
        return 0.0

    def spec(self) -> str:
        return f"euclidean:dim={self.dim}"

    def validate(self, x) -> np.ndarray:
        x = np.array(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ValidationError(f"expected {self.dim} coordinates, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("point has non-finite coordinates")
        return x

    def base_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    def dist(self, p, q):
        return _norm(np.asarray(q, dtype=float) - np.asarray(p, dtype=float))

    def log(self, p, q):
        return np.asarray(q, dtype=float) - np.asarray(p, dtype=float)

    def exp(self, p, v):
        return np.asarray(p, dtype=float) + np.asarray(v, dtype=float)

    def distance_to_geodesic(self, a, b, x):
        a = np.asarray(a, dtype=float)
        e = np.asarray(b, dtype=float) - a
        e = e / _norm(e)[..., None]
        r = np.asarray(x, dtype=float) - a
        perp = r - np.sum(r * e, axis=-1)[..., None] * e
        return _norm(perp)

    def geodesic_velocity(self, p, e, s):
        return np.broadcast_to(np.asarray(e, dtype=float), np.shape(p)).copy()


@dataclass(frozen=True)
class Sphere(ManifoldSpace):
    """Round sphere of radius ``radius`` embedded in R^(dim+1)."""

    radius: float = 1.0
    kind = "sphere"

    def __post_init__(self):
        super().__post_init__()
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValidationError(f"sphere radius must be positive, got {self.radius!r}")

    @property
    def scale(self) -> float:
        return float(self.radius)

    @property
    def length_scale(self) -> float:
        return float(self.radius)

    @property
    def curvature(self) -> float:
        return 1.0 / self.radius**2

    @property
    def injectivity_radius(self) -> float:
        return math.pi * self.radius

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1

    def validate(self, x) -> np.ndarray:
        x = np.array(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim + 1:
            raise ValidationError(
                f"expected {self.dim + 1} ambient coordinates, got shape {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise ValidationError("point has non-finite coordinates")
        n = _norm(x)
        resid = np.abs(n / self.radius - 1.0)
        if np.any(resid > RENORMALIZE_TOL):
            raise ValidationError(
                f"point is off the sphere of radius {self.radius} (residual {float(np.max(resid)):.3e})"
            )
        return x * (self.radius / n)[..., None]

    def base_point(self) -> np.ndarray:
        x = np.zeros(self.dim + 1)
        x[0] = self.radius
        return x

    def proj(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        return v - (np.sum(p * v, axis=-1) / self.radius**2)[..., None] * p

    def _tangency(self, p, v):
        return np.sum(p * v, axis=-1) / self.radius

    def _angle(self, u, w):
        # Kahan's formula, accurate for every angle in [0, pi]
        return 2.0 * np.arctan2(_norm(w - u), _norm(w + u))

    def dist(self, p, q):
        u = np.asarray(p, dtype=float) / self.radius
        w = np.asarray(q, dtype=float) / self.radius
        return self.radius * self._angle(u, w)

    def log(self, p, q):
        p = np.asarray(p, dtype=float)
        u = p / self.radius
        w = np.asarray(q, dtype=float) / self.radius
        theta = self._angle(u, w)
        if np.any(theta >= math.pi - CUT_TOL):
            raise CutLocusError("log undefined: point at or beyond the cut locus (antipode)")
        v = w - np.sum(u * w, axis=-1)[..., None] * u
        nv = _norm(v)
        safe = np.where(nv > 0, nv, 1.0)
        scale = np.where(nv > 0, self.radius * theta / safe, 0.0)
        return scale[..., None] * v

    def exp(self, p, v):
        p = np.asarray(p, dtype=float)
        v = self.check_tangent(p, v)
        s = _norm(v)
        a = s / self.radius
        out = np.cos(a)[..., None] * p + _sinc(a)[..., None] * v
        return out * (self.radius / _norm(out))[..., None]

    def distance_to_geodesic(self, a, b, x):
        a = np.asarray(a, dtype=float) / self.radius
        w = np.asarray(b, dtype=float) / self.radius
        e = w - np.sum(a * w, axis=-1)[..., None] * a
        e = e / _norm(e)[..., None]
        u = np.asarray(x, dtype=float) / self.radius
        ca = np.sum(u * a, axis=-1)[..., None]
        ce = np.sum(u * e, axis=-1)[..., None]
        inplane = ca * a + ce * e
        return self.radius * np.arctan2(_norm(u - inplane), _norm(inplane))

    def geodesic_velocity(self, p, e, s):
        p = np.asarray(p, dtype=float)
        e = np.asarray(e, dtype=float)
        a = np.asarray(s, dtype=float) / self.radius
        return -(np.sin(a) / self.radius)[..., None] * p + np.cos(a)[..., None] * e


def minkowski(u, v):
    """Minkowski bilinear form -u0 v0 + sum_i ui vi over the last axis."""
    return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]


@dataclass(frozen=True)
class Hyperbolic(ManifoldSpace):
    """Hyperboloid model of hyperbolic space with curvature ``-kappa``."""

    kappa: float = 1.0
    kind = "hyperbolic"

    def __post_init__(self):
        super().__post_init__()
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ValidationError(f"kappa must be positive, got {self.kappa!r}")

    @property
    def scale(self) -> float:
        return float(self.kappa)

    @property
    def length(self) -> float:
        """Curvature length 1/sqrt(kappa)."""
        return 1.0 / math.sqrt(self.kappa)

    @property
    def length_scale(self) -> float:
        return self.length

    @property
    def curvature(self) -> float:
        return -float(self.kappa)

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1

    def validate(self, x) -> np.ndarray:
        x = np.array(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim + 1:
            raise ValidationError(
                f"expected {self.dim + 1} ambient coordinates, got shape {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise ValidationError("point has non-finite coordinates")
        if np.any(x[..., 0] <= 0):
            raise ValidationError("hyperboloid points need x0 > 0")
        a2 = self.length**2
        resid = np.abs(-minkowski(x, x) / a2 - 1.0)
        if np.any(resid > RENORMALIZE_TOL):
            raise ValidationError(
                f"point is off the hyperboloid (residual {float(np.max(resid)):.3e})"
            )
        return self.lift(x[..., 1:])

    def lift(self, spatial) -> np.ndarray:
        """Recompute x0 from the spatial coordinates."""
        spatial = np.asarray(spatial, dtype=float)
        x0 = np.sqrt(self.length**2 + np.sum(spatial * spatial, axis=-1))
        return np.concatenate([x0[..., None], spatial], axis=-1)

    def base_point(self) -> np.ndarray:
        x = np.zeros(self.dim + 1)
        x[0] = self.length
        return x

    def inner(self, p, u, v):
        return minkowski(u, v)

    def proj(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        return v + (minkowski(p, v) / self.length**2)[..., None] * p

    def _tangency(self, p, v):
        return minkowski(p, v) / self.length

    def _angle(self, u, w):
        c = -minkowski(u, w)
        d = w - u
        small = 2.0 * np.arcsinh(np.sqrt(np.maximum(minkowski(d, d), 0.0)) / 2.0)
        large = np.arccosh(np.maximum(c, 1.0))
        return np.where(c < 2.0, small, large)

    def dist(self, p, q):
        a = self.length
        u = np.asarray(p, dtype=float) / a
        w = np.asarray(q, dtype=float) / a
        return a * self._angle(u, w)

    def log(self, p, q):
        a = self.length
        u = np.asarray(p, dtype=float) / a
        w = np.asarray(q, dtype=float) / a
        theta = self._angle(u, w)
        v = w + minkowski(u, w)[..., None] * u
        # |v|_L = sinh(theta); scale to length a*theta
        return (a / _sinhc(theta))[..., None] * v

    def exp(self, p, v):
        a = self.length
        p = np.asarray(p, dtype=float)
        v = self.check_tangent(p, v)
        s = np.sqrt(np.maximum(minkowski(v, v), 0.0))
        t = s / a
        out = np.cosh(t)[..., None] * p + _sinhc(t)[..., None] * v
        return self.lift(out[..., 1:])

    def distance_to_geodesic(self, a, b, x):
        ln = self.length
        ua = np.asarray(a, dtype=float) / ln
        e = self.proj(a, np.asarray(b, dtype=float)) / ln
        e = e / np.sqrt(minkowski(e, e))[..., None]
        u = np.asarray(x, dtype=float) / ln
        # split u into the timelike plane span(ua, e) and its complement
        inplane = -minkowski(u, ua)[..., None] * ua + minkowski(u, e)[..., None] * e
        perp = u - inplane
        return ln * np.arcsinh(np.sqrt(np.maximum(minkowski(perp, perp), 0.0)))

    def geodesic_velocity(self, p, e, s):
        a = self.length
        p = np.asarray(p, dtype=float)
        e = np.asarray(e, dtype=float)
        t = np.asarray(s, dtype=float) / a
        return (np.sinh(t) / a)[..., None] * p + np.cosh(t)[..., None] * e


def make_space(kind: str, dim: int, scale: float = 1.0) -> ManifoldSpace:
    """Build a model space from its kind name, dimension and scale."""
    if kind == "euclidean":
        return Euclidean(dim)
    if kind == "sphere":
        return Sphere(dim, float(scale))
    if kind == "hyperbolic":
        return Hyperbolic(dim, float(scale))
    raise ValidationError(f"unknown space kind {kind!r}")


def parse_space(text: str) -> ManifoldSpace:
    """Parse ``kind:dim=2,scale=1`` (``R``/``radius``/``kappa`` alias ``scale``)."""
    kind, _, rest = text.strip().partition(":")
    opts = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValidationError(f"bad space option {item!r} in {text!r}")
        opts[key.strip()] = val.strip()
    try:
        dim = int(opts.pop("dim", 2))
        scale = 1.0
        for key in ("scale", "R", "radius", "kappa"):
            if key in opts:
                scale = float(opts.pop(key))
    except ValueError as exc:
        raise ValidationError(f"bad space spec {text!r}: {exc}") from None
    if opts:
        raise ValidationError(f"unknown space options {sorted(opts)} in {text!r}")
    return make_space(kind.strip(), dim, scale)


def curvature_constants(space: ManifoldSpace) -> tuple[float, float, float]:
    """Return ``(delta, r_inj, r_cx_bound)`` for a model space.

    ``r_cx_bound = min(pi/sqrt(delta), r_inj) / 2`` is the lower bound on the
    convexity radius; ``pi/sqrt(delta)`` counts as infinite when ``delta <= 0``.
    """
    delta = space.curvature
    r_inj = space.injectivity_radius
    return delta, r_inj, 0.5 * min(pi_over_sqrt(delta), r_inj)


def pi_over_sqrt(delta: float, factor: float = 1.0) -> float:
    """``pi / (factor * sqrt(delta))`` with the flat/negative case mapped to inf."""
    if delta <= 0:
        return INF
    return math.pi / (factor * math.sqrt(delta))
