"""Seeded data generators for the bundled spaces."""

from __future__ import annotations

import math

import numpy as np

from .certify import tangent_basis
from .exceptions import DomainError, ValidationError
from .geometry import ManifoldSpace, Sphere

KINDS = ("cap", "geodesic", "antipodal", "equator")


def generate(
    space: ManifoldSpace,
    kind: str,
    n: int = 50,
    radius: float = 0.3,
    rng=None,
    center=None,
) -> np.ndarray:
    """Points of one fixture family, shape (n, D).

    cap
        ``n`` uniform draws from the geodesic ball of ``radius`` about ``center``.
    geodesic
        ``n`` draws on a random geodesic through ``center``, at arclength
        offsets uniform in ``(-radius, radius)``.
    antipodal
        ``center`` and its antipode (sphere only; ``n`` is ignored).
    equator
        ``n >= 3`` equally spaced points on the great circle of the first two
        tangent directions at ``center`` (sphere only).
    """
    rng = np.random.default_rng(rng)
    center = space.base_point() if center is None else space.validate(center)
    if kind == "cap":
        _check_n(n, 1)
        return space.random_points_in_ball(center, radius, n, rng)
    if kind == "geodesic":
        _check_n(n, 1)
        if not 0 < radius < space.injectivity_radius / 2:
            raise DomainError("geodesic fixture radius must lie in (0, r_inj / 2)")
        e = space.random_tangent(center, rng)
        s = radius * (2.0 * rng.random(n) - 1.0)
        return space.exp(center, s[:, None] * e)
    if kind == "antipodal":
        _need_sphere(space, kind)
        return np.array([center, -center])
    if kind == "equator":
        _need_sphere(space, kind)
        _check_n(n, 3)
        if space.dim < 2:
            raise DomainError("equator fixture needs dim >= 2")
        e0, e1 = tangent_basis(space, center)[:2]
        ang = 2.0 * math.pi * np.arange(n) / n
        return space.radius * (np.cos(ang)[:, None] * e0 + np.sin(ang)[:, None] * e1)
    raise ValidationError(f"unknown fixture kind {kind!r}; expected one of {', '.join(KINDS)}")


def _check_n(n, least):
    if int(n) != n or n < least:
        raise ValidationError(f"n must be an integer >= {least}")


def _need_sphere(space, kind):
    if not isinstance(space, Sphere):
        raise DomainError(f"{kind} fixture needs a sphere")
