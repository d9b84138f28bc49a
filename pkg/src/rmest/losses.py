"""Loss functions rho(t) of a distance t >= 0 and their condition classes.

Classes, from weakest to strongest:

``C1only``
    non-decreasing, continuous, rho(0) = 0 (every bundled loss).
``C2``
    additionally rho' positive and non-decreasing on (0, inf), rho'' >= 0 off a
    countable exception set ``S``.
``C3``
    additionally rho'(0+) = 0 and rho twice continuously differentiable with
    rho'' positive and non-decreasing on (0, inf).

Each loss carries a hand-declared class; :func:`classify` refutes it on a
sampling grid when it is wrong.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ClassificationError, DomainError, ValidationError

LOG2 = math.log(2.0)


class LossClass(str, enum.Enum):
    C1ONLY = "C1only"
    C2 = "C2"
    C3 = "C3"

    def __str__(self):
        return self.value

    @property
    def rank(self) -> int:
        return {"C1only": 1, "C2": 2, "C3": 3}[self.value]


@dataclass(frozen=True)
class Loss:
    """A loss rho with closed-form first and second derivatives.

    Subclasses implement ``_rho``, ``_d1`` and ``_d2`` on arrays of
    non-negative reals; the public methods add domain checks.
    """

    name = "loss"
    declared_class = LossClass.C1ONLY

    @property
    def cutoff(self) -> float | None:
        return None

    @property
    def exponent(self) -> float | None:
        return None

    @property
    def exception_set(self) -> tuple[float, ...]:
        """Points where rho'' is undefined."""
        return ()

    @property
    def sup(self) -> float:
        """lim_{t -> inf} rho(t)."""
        return math.inf

    @property
    def weight_at_zero(self) -> float:
        """lim_{t -> 0+} rho'(t)/t."""
        return float(self._d2(np.array(0.0)))

    @property
    def slope_at_zero(self) -> float:
        """Right derivative rho'(0+)."""
        return float(self._d1(np.array(0.0)))

    def spec(self) -> str:
        return self.name

    def __str__(self):
        return self.spec()

    # -- evaluation ------------------------------------------------------
    def rho(self, t):
        return self._rho(np.asarray(t, dtype=float))

    def d1(self, t):
        return self._d1(np.asarray(t, dtype=float))

    def d2(self, t):
        return self._d2(np.asarray(t, dtype=float))

    def evaluate(self, t, order: int = 0):
        """rho (order 0), rho' (order 1) or rho'' (order 2) at ``t >= 0``.

        Order 1 at ``t = 0`` is the right derivative. Order 2 at a point of the
        exception set raises :class:`DomainError`.
        """
        t = np.asarray(t, dtype=float)
        if np.any(~(t >= 0)):
            raise DomainError(f"{self.name}: loss argument must be >= 0")
        if order == 0:
            out = self._rho(t)
        elif order == 1:
            out = self._d1(t)
        elif order == 2:
            for s in self.exception_set:
                if np.any(t == s):
                    raise DomainError(f"{self.name}: rho'' undefined at t={s}")
            out = self._d2(t)
        else:
            raise ValueError(f"order must be 0, 1 or 2, got {order}")
        out = np.asarray(out, dtype=float)
        return out[()] if out.ndim == 0 else out

    def weight(self, t):
        """IRLS weight rho'(t)/t, with its limit at t = 0 (possibly inf)."""
        t = np.asarray(t, dtype=float)
        if np.any(~(t >= 0)):
            raise DomainError(f"{self.name}: loss argument must be >= 0")
        pos = t > 0
        safe = np.where(pos, t, 1.0)
        out = np.where(pos, self._d1(safe) / safe, self.weight_at_zero)
        return out[()] if out.ndim == 0 else out

    def _rho(self, t):
        raise NotImplementedError

    def _d1(self, t):
        raise NotImplementedError

    def _d2(self, t):
        raise NotImplementedError


def _check_cutoff(c):
    if not (c > 0 and math.isfinite(c)):
        raise ValidationError(f"cutoff must be positive and finite, got {c!r}")


@dataclass(frozen=True)
class Huber(Loss):
    c: float = 1.345
    name = "huber"
    declared_class = LossClass.C2

    def __post_init__(self):
        _check_cutoff(self.c)

    cutoff = property(lambda self: self.c)
    exception_set = property(lambda self: (self.c,))

    def spec(self):
        return f"huber:c={self.c!r}"

    def _rho(self, t):
        c = self.c
        return np.where(t <= c, t * t, c * (2.0 * t - c))

    def _d1(self, t):
        return np.where(t <= self.c, 2.0 * t, 2.0 * self.c)

    def _d2(self, t):
        return np.where(t <= self.c, 2.0, 0.0)


@dataclass(frozen=True)
class PseudoHuber(Loss):
    """Smooth Huber surrogate 2c^2 (sqrt(1 + (t/c)^2) - 1), ~t^2 near 0 and ~2ct far out."""

    c: float = 1.0
    name = "pseudo_huber"
    declared_class = LossClass.C2

    def __post_init__(self):
        _check_cutoff(self.c)

    cutoff = property(lambda self: self.c)

    def spec(self):
        return f"pseudo_huber:c={self.c!r}"

    def _rho(self, t):
        u = t / self.c
        # 2c^2 (sqrt(1+u^2) - 1) without cancellation
        return 2.0 * self.c**2 * u * u / (np.sqrt(1.0 + u * u) + 1.0)

    def _d1(self, t):
        u = t / self.c
        return 2.0 * t / np.sqrt(1.0 + u * u)

    def _d2(self, t):
        u = t / self.c
        return 2.0 / (1.0 + u * u) ** 1.5


@dataclass(frozen=True)
class Tukey(Loss):
    c: float = 4.685
    name = "tukey"
    declared_class = LossClass.C1ONLY

    def __post_init__(self):
        _check_cutoff(self.c)

    cutoff = property(lambda self: self.c)
    sup = property(lambda self: self.c**2 / 6.0)

    def spec(self):
        return f"tukey:c={self.c!r}"

    def _rho(self, t):
        u2 = np.minimum(t / self.c, 1.0) ** 2
        return self.c**2 / 6.0 * (1.0 - (1.0 - u2) ** 3)

    def _d1(self, t):
        u2 = (t / self.c) ** 2
        return np.where(t <= self.c, t * (1.0 - u2) ** 2, 0.0)

    def _d2(self, t):
        u2 = (t / self.c) ** 2
        return np.where(t <= self.c, (1.0 - u2) * (1.0 - 5.0 * u2), 0.0)


@dataclass(frozen=True)
class Welsch(Loss):
    c: float = 2.985
    name = "welsch"
    declared_class = LossClass.C1ONLY

    def __post_init__(self):
        _check_cutoff(self.c)

    cutoff = property(lambda self: self.c)
    sup = property(lambda self: 1.0)

    def spec(self):
        return f"welsch:c={self.c!r}"

    def _rho(self, t):
        return -np.expm1(-((t / self.c) ** 2))

    def _d1(self, t):
        return 2.0 * t / self.c**2 * np.exp(-((t / self.c) ** 2))

    def _d2(self, t):
        u2 = (t / self.c) ** 2
        return 2.0 / self.c**2 * (1.0 - 2.0 * u2) * np.exp(-u2)


@dataclass(frozen=True)
class Andrews(Loss):
    c: float = 1.339
    name = "andrews"
    declared_class = LossClass.C1ONLY

    def __post_init__(self):
        _check_cutoff(self.c)

    cutoff = property(lambda self: self.c)
    exception_set = property(lambda self: (math.pi * self.c,))
    sup = property(lambda self: 2.0 * self.c**2)

    def spec(self):
        return f"andrews:c={self.c!r}"

    def _rho(self, t):
        inside = t <= math.pi * self.c
        return np.where(inside, self.c**2 * (1.0 - np.cos(t / self.c)), 2.0 * self.c**2)

    def _d1(self, t):
        return np.where(t <= math.pi * self.c, self.c * np.sin(t / self.c), 0.0)

    def _d2(self, t):
        return np.where(t <= math.pi * self.c, np.cos(t / self.c), 0.0)


@dataclass(frozen=True)
class LogCosh(Loss):
    name = "logcosh"
    declared_class = LossClass.C2

    def _rho(self, t):
        return t + np.log1p(np.exp(-2.0 * t)) - LOG2

    def _d1(self, t):
        return np.tanh(t)

    def _d2(self, t):
        return 1.0 / np.cosh(np.minimum(t, 350.0)) ** 2


@dataclass(frozen=True)
class Lp(Loss):
    """rho(t) = t**p for p >= 1; class C3 for p >= 2, C2 for 1 <= p < 2."""

    p: float = 2.0
    name = "lp"

    def __post_init__(self):
        if not (self.p >= 1 and math.isfinite(self.p)):
            raise ValidationError(f"lp exponent must be >= 1, got {self.p!r}")

    exponent = property(lambda self: self.p)

    @property
    def declared_class(self):
        return LossClass.C3 if self.p >= 2 else LossClass.C2

    @property
    def exception_set(self):
        return (0.0,) if 1 < self.p < 2 else ()

    @property
    def weight_at_zero(self):
        if self.p == 2:
            return 2.0
        return 0.0 if self.p > 2 else math.inf

    @property
    def slope_at_zero(self):
        return 1.0 if self.p == 1 else 0.0

    def spec(self):
        return f"lp:p={self.p!r}"

    def _rho(self, t):
        return t**self.p

    def _d1(self, t):
        p = self.p
        if p == 1:
            return np.ones_like(t)
        return p * t ** (p - 1.0)

    def _d2(self, t):
        p = self.p
        if p == 1:
            return np.zeros_like(t)
        if p == 2:
            return np.full_like(t, 2.0)
        with np.errstate(divide="ignore"):
            return p * (p - 1.0) * t ** (p - 2.0)


@dataclass(frozen=True)
class Absolute(Lp):
    p: float = field(default=1.0, init=False)
    name = "abs"

    def spec(self):
        return "abs"


@dataclass(frozen=True)
class SoftplusSquare(Loss):
    """(log(1 + e^t) - log 2)^2, the squared softplus shifted to vanish at 0.

    rho'' rises from 1/2 to a peak near t = 3.74 and then decays to 2, so the
    loss is C2 rather than C3, although rho'(t) <= t rho''(t) holds.
    """

    name = "softplus2"
    declared_class = LossClass.C2

    @staticmethod
    def _parts(t):
        big = t >= 1.0
        tb = np.where(big, t, 0.0)
        ts = np.where(big, 0.0, t)
        m = np.where(big, np.logaddexp(0.0, tb) - LOG2, np.log1p(np.expm1(ts) / 2.0))
        sig = 0.5 * (1.0 + np.tanh(t / 2.0))
        return m, sig

    def _rho(self, t):
        m, _ = self._parts(t)
        return m * m

    def _d1(self, t):
        m, sig = self._parts(t)
        return 2.0 * m * sig

    def _d2(self, t):
        m, sig = self._parts(t)
        # sig*(1-sig) without cancellation
        s1 = 0.25 / np.cosh(np.minimum(t, 700.0) / 2.0) ** 2
        return 2.0 * sig * sig + 2.0 * m * s1


BUNDLED_DEFAULTS = {
    "huber": Huber,
    "tukey": Tukey,
    "welsch": Welsch,
    "andrews": Andrews,
    "logcosh": LogCosh,
    "lp": Lp,
    "softplus2": SoftplusSquare,
    "abs": Absolute,
    "pseudo_huber": PseudoHuber,
}


def parse_loss(text: str) -> Loss:
    """Parse a loss spec such as ``huber:c=1.345``, ``lp:p=3`` or ``abs``."""
    name, _, rest = text.strip().partition(":")
    name = name.strip()
    if name not in BUNDLED_DEFAULTS:
        raise ValidationError(f"unknown loss {name!r}; known: {', '.join(BUNDLED_DEFAULTS)}")
    kwargs = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValidationError(f"bad loss option {item!r} in {text!r}")
        try:
            kwargs[key.strip()] = float(val)
        except ValueError:
            raise ValidationError(f"bad numeric value in {text!r}") from None
    try:
        return BUNDLED_DEFAULTS[name](**kwargs)
    except TypeError:
        raise ValidationError(f"unsupported options for {name}: {sorted(kwargs)}") from None


def bundled_losses(c: float = 1.0) -> list[Loss]:
    """One instance of every bundled loss, with cutoff ``c`` where relevant."""
    return [
        Huber(c),
        Tukey(c),
        Welsch(c),
        Andrews(c),
        LogCosh(),
        Lp(2.0),
        SoftplusSquare(),
        Absolute(),
        PseudoHuber(c),
    ]


# -- classification -----------------------------------------------------------

@dataclass
class ClassReport:
    """Outcome of :func:`classify`: the verified class and refuting witnesses."""

    declared: LossClass
    verified: LossClass
    violations: list[tuple[str, float, float]]

    @property
    def consistent(self) -> bool:
        return self.declared == self.verified


def default_grid(loss: Loss, n: int = 4000) -> np.ndarray:
    t_max = 100.0 * (loss.cutoff or 1.0)
    grid = np.union1d(np.logspace(-6, math.log10(t_max), n), np.linspace(0, t_max, n)[1:])
    return grid


def _drop_exceptions(loss, t):
    keep = np.ones_like(t, dtype=bool)
    for s in loss.exception_set:
        keep &= np.abs(t - s) > 1e-9 * max(1.0, s)
    return t[keep]


def _first_drop(values, t, tol):
    """Index of the first grid step where ``values`` decreases beyond ``tol``."""
    scale = np.maximum(1.0, np.abs(values[:-1]))
    bad = np.nonzero(np.diff(values) < -tol * scale)[0]
    return int(bad[0]) + 1 if bad.size else None


def classify(loss: Loss, grid=None, tol: float = 1e-12, check: bool = True) -> ClassReport:
    """Verify the strongest condition class the grid cannot refute.

    Raises :class:`ClassificationError` naming the witness when the verified
    class differs from ``loss.declared_class`` (unless ``check`` is False).
    """
    t = default_grid(loss) if grid is None else np.unique(np.asarray(grid, dtype=float))
    if t[0] <= 0:
        t = t[t > 0]
    cutoff = loss.cutoff or 1.0
    if t[-1] < 10.0 * cutoff:
        raise DomainError(f"grid must reach at least {10.0 * cutoff}")
    violations = []

    tz = np.concatenate([[0.0], t])
    r = loss.rho(tz)
    if abs(r[0]) > tol:
        violations.append(("C1: rho(0) = 0", 0.0, float(r[0])))
    if not np.all(np.isfinite(r)):
        i = int(np.argmin(np.isfinite(r)))
        violations.append(("C1: rho finite", float(tz[i]), float(r[i])))
    i = _first_drop(r, tz, tol)
    if i is not None:
        violations.append(("C1: rho non-decreasing", float(tz[i]), float(r[i] - r[i - 1])))
    if np.all(r == 0):
        violations.append(("C1: rho not identically 0", float(tz[-1]), 0.0))
    c1 = not violations

    ts = _drop_exceptions(loss, t)
    d1 = loss.d1(ts)
    d2 = loss.d2(ts)
    c2_viol = []
    bad = np.nonzero(~(d1 > 0))[0]
    if bad.size:
        c2_viol.append(("C2: rho' > 0", float(ts[bad[0]]), float(d1[bad[0]])))
    i = _first_drop(d1, ts, tol)
    if i is not None:
        c2_viol.append(("C2: rho' non-decreasing", float(ts[i]), float(d1[i] - d1[i - 1])))
    bad = np.nonzero(d2 < -tol)[0]
    if bad.size:
        c2_viol.append(("C2: rho'' >= 0", float(ts[bad[0]]), float(d2[bad[0]])))
    violations += c2_viol
    c2 = c1 and not c2_viol

    c3_viol = []
    if loss.exception_set:
        s = loss.exception_set[0]
        c3_viol.append(("C3: rho twice continuously differentiable", float(s), math.nan))
    slope0 = loss.slope_at_zero
    if abs(slope0) > tol:
        c3_viol.append(("C3: rho'(0+) = 0", 0.0, slope0))
    bad = np.nonzero(~(d2 > 0))[0]
    if bad.size:
        c3_viol.append(("C3: rho'' > 0", float(ts[bad[0]]), float(d2[bad[0]])))
    i = _first_drop(d2, ts, tol)
    if i is not None:
        c3_viol.append(("C3: rho'' non-decreasing", float(ts[i]), float(d2[i] - d2[i - 1])))
    violations += c3_viol
    c3 = c2 and not c3_viol

    verified = LossClass.C3 if c3 else LossClass.C2 if c2 else LossClass.C1ONLY
    if not c1:
        raise ClassificationError(f"{loss.spec()} violates the basic loss conditions: {violations[0]}")
    report = ClassReport(loss.declared_class, verified, violations)
    if check and not report.consistent:
        above = f"C{verified.rank + 1}"
        witness = next((v for v in violations if v[0].startswith(above)), None)
        raise ClassificationError(
            f"{loss.spec()} declared {loss.declared_class} but verified {verified}; witness {witness}"
        )
    return report


def lemma2_gap(loss: Loss, t, require_c3: bool = True):
    """Return ``t * rho''(t) - rho'(t)``, non-negative for C3 losses.

    ``require_c3=False`` evaluates the gap for any loss with ``rho''`` defined
    at ``t``.
    """
    if require_c3 and loss.declared_class != LossClass.C3:
        raise DomainError(f"{loss.spec()} is {loss.declared_class}, not C3")
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("lemma2_gap requires t > 0")
    out = t * loss.evaluate(t, 2) - loss.evaluate(t, 1)
    out = np.asarray(out)
    return out[()] if out.ndim == 0 else out
