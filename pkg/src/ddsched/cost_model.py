"""Deadlock size functions, resolution costs and the long-run cost functional.

Time is measured in seconds, rates in 1/seconds and every cost in messages.
Size and resolution models are frozen dataclasses whose ``__call__`` accepts
either a float or a numpy array, so the simulator can evaluate whole batches
of persistence times at once.
"""

from __future__ import annotations

import math
import numbers
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError
from .quadrature import DEFAULT_REL_TOL, adaptive_simpson

DEFAULT_TRUNCATION_ORDER = 4
# Relative weight the neglected tail of an improper integral may carry.
TAIL_REL_TOL = 1e-12
# Below this argument the exponential closed forms switch to power series.
_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 40


# ---------------------------------------------------------------------------
# Numerically stable pieces of the exponential closed forms
# ---------------------------------------------------------------------------


def _gap_exp(x: float) -> float:
    """Return ``x - (1 - exp(-x))``, the integral of ``1 - exp(-u)`` on [0, x]."""
    if x < _SERIES_CUTOFF:
        return _alt_series(x, lambda k: 1.0)
    return x + math.expm1(-x)


def _gap_exp_sq(x: float) -> float:
    """Return the integral of ``(1 - exp(-u))**2`` on [0, x]."""
    if x < _SERIES_CUTOFF:
        # (1 - e^-u)^2 = sum_{k>=2} (-1)^k (2^k - 2) u^k / k!, integrated term-wise
        return _alt_series(x, lambda k: 2.0 - 2.0 ** (k - 1))
    a = -math.expm1(-x)
    return x - a - 0.5 * a * a


def _alt_series(x: float, weight: Callable[[int], float]) -> float:
    # sum_{k>=2} (-1)^k weight(k) x^k / k!, with weight indexed on the power of x
    total = 0.0
    term = x  # x^1 / 1!
    for k in range(2, _SERIES_TERMS):
        term *= x / k
        w = weight(k)
        if w:
            total += (term * w) if k % 2 == 0 else -(term * w)
    return total


# ---------------------------------------------------------------------------
# Deadlock size models n_D(t)
# ---------------------------------------------------------------------------


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, numbers.Real) and not isinstance(value, bool) and math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class Saturating:
    """``n_D(t) = n * (1 - exp(-rate * t))``."""

    n: float
    rate: float = 1.0

    def __post_init__(self) -> None:
        _positive("n", self.n)
        _positive("rate", self.rate)

    def __call__(self, t):
        return self.n * -np.expm1(-self.rate * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class SqrtSaturating:
    """``n_D(t) = n * sqrt(1 - exp(-rate * t))``.

    With the ``c * n * n_D**2`` resolution shape this reproduces the
    saturating-exponential resolution cost ``c * n**3 * (1 - exp(-rate * t))``.
    """

    n: float
    rate: float = 1.0

    def __post_init__(self) -> None:
        _positive("n", self.n)
        _positive("rate", self.rate)

    def __call__(self, t):
        return self.n * np.sqrt(-np.expm1(-self.rate * np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class Polynomial:
    """Truncated Maclaurin model ``n_D(t) = min(n, sum_i coeffs[i-1] * t**i)``.

    ``coeffs`` starts at the linear term (the constant term is zero because a
    deadlock has no blocked processes at formation). With ``relative=True``
    the polynomial describes the blocked *fraction*, i.e.
    ``n_D(t) = n * min(1, sum_i c_i t**i)``, which is the normalisation under
    which the optimal interval scales like ``(lambda * n) ** (-1/3)``.

    Results are exact for the truncated polynomial, not for whatever infinite
    series it was cut from.
    """

    n: float
    coeffs: tuple[float, ...]
    relative: bool = False

    def __post_init__(self) -> None:
        _positive("n", self.n)
        coeffs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if not coeffs:
            raise DomainError("polynomial size model needs at least the linear coefficient")
        if any(not math.isfinite(c) or c < 0 for c in coeffs):
            raise DomainError(f"polynomial coefficients must be finite and >= 0, got {coeffs}")
        if coeffs[0] <= 0:
            raise DomainError("the linear coefficient c1 must be > 0")

    @classmethod
    def from_derivatives(
        cls,
        n: float,
        derivatives: list[float] | tuple[float, ...],
        order: int = DEFAULT_TRUNCATION_ORDER,
        relative: bool = False,
    ) -> "Polynomial":
        """Build from the derivatives ``n_D'(0), n_D''(0), ...`` truncated at ``order``."""
        if order < 1:
            raise DomainError(f"truncation order must be >= 1, got {order}")
        ds = list(derivatives)[:order]
        return cls(n=n, coeffs=tuple(d / math.factorial(i) for i, d in enumerate(ds, start=1)), relative=relative)

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @property
    def _scale_cap(self) -> tuple[float, float]:
        # n_D = scale * min(cap, p(t))
        return (self.n, 1.0) if self.relative else (1.0, self.n)

    def raw(self, t):
        """Untruncated polynomial ``sum_i c_i t**i`` (Horner, no saturation)."""
        t = np.asarray(t, dtype=float)
        acc = np.zeros_like(t)
        for c in reversed(self.coeffs):
            acc = (acc + c) * t
        return acc

    def __call__(self, t):
        scale, cap = self._scale_cap
        return scale * np.minimum(cap, self.raw(t))

    def saturation_time(self) -> float:
        """Time at which the polynomial first reaches the cap ``n`` (or 1 if relative)."""
        _, cap = self._scale_cap
        lo, hi = 0.0, 1.0
        while float(self.raw(hi)) < cap:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if float(self.raw(mid)) < cap:
                lo = mid
            else:
                hi = mid
        return hi

    def squared_integral(self, T: float) -> float:
        """Closed-form ``integral_0^T n_D(t)**2 dt`` via power-rule integration."""
        scale, cap = self._scale_cap
        ts = self.saturation_time()
        upper = min(T, ts)
        p = np.polynomial.Polynomial((0.0,) + self.coeffs)
        head = float((p * p).integ()(upper))
        tail = cap * cap * max(0.0, T - ts)
        return scale * scale * (head + tail)


SizeModel = Union[Saturating, SqrtSaturating, Polynomial]


def eval_size(model: SizeModel, t):
    """Deadlock size after persistence time ``t`` (real-valued approximation)."""
    _check_time(t)
    out = model(t)
    return float(out) if np.ndim(out) == 0 else out


def _check_time(t) -> None:
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"persistence time must be >= 0, got {t!r}")


# ---------------------------------------------------------------------------
# Complexity presets
# ---------------------------------------------------------------------------


def _edges(n: float) -> float:
    return n * (n - 1)


@dataclass(frozen=True)
class ComplexityPreset:
    """Worst-case message complexity of a detection algorithm.

    ``resolution_exponent`` is the beta in ``C_R(inf) = Theta(n**beta)`` for the
    paired resolution algorithm; resolution cost built from a size model is
    ``c * n**(beta - 2) * n_D(t)**2``.
    """

    name: str
    detection_messages: Callable[[float], float]
    resolution_exponent: float = 3.0
    description: str = ""

    def detection_cost(self, n: float) -> float:
        return float(self.detection_messages(n))


PRESETS: dict[str, ComplexityPreset] = {
    p.name: p
    for p in (
        ComplexityPreset("bracha-toueg", lambda n: 4 * _edges(n), description="4e"),
        ComplexityPreset("wang", lambda n: 6 * _edges(n), description="6e"),
        # l (sink nodes of the wait-for graph) taken as 0 in the worst case
        ComplexityPreset("kshemkalyani-singhal-94", lambda n: 4 * _edges(n) - 2 * n, description="4e-2n+2l, l=0"),
        ComplexityPreset("kshemkalyani-singhal-99", lambda n: 2 * _edges(n), description="2e"),
        ComplexityPreset("worst-case", lambda n: 2.0 * n * n, description="2n^2"),
        ComplexityPreset("example", lambda n: float(n) * n, description="n^2"),
    )
}
MENDIVIL = PRESETS["worst-case"]


def get_preset(name: str) -> ComplexityPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# ---------------------------------------------------------------------------
# Resolution cost models C_R(t)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FromSize:
    """``C_R(t) = c * n**(beta - 2) * n_D(t)**2``; beta = 3 gives ``c * n * n_D**2``."""

    size: SizeModel
    preset: ComplexityPreset = MENDIVIL
    c: float = 1.0

    def __post_init__(self) -> None:
        _positive("c", self.c)

    @property
    def n(self) -> float:
        return self.size.n

    @property
    def factor(self) -> float:
        return self.c * self.n ** (self.preset.resolution_exponent - 2.0)

    @property
    def asymptote(self) -> float:
        return self.factor * self.n * self.n

    def __call__(self, t):
        s = self.size(t)
        return self.factor * s * s

    def closed_integral(self, T: float) -> float | None:
        size = self.size
        if isinstance(size, Saturating):
            return self.factor * size.n**2 * _gap_exp_sq(size.rate * T) / size.rate
        if isinstance(size, SqrtSaturating):
            return self.factor * size.n**2 * _gap_exp(size.rate * T) / size.rate
        if isinstance(size, Polynomial):
            return self.factor * size.squared_integral(T)
        return None


@dataclass(frozen=True)
class ClosedForm:
    """``C_R(t) = amplitude * (1 - exp(-rate * t))``."""

    amplitude: float
    rate: float = 1.0
    kind: Literal["saturating-exponential"] = "saturating-exponential"

    def __post_init__(self) -> None:
        _positive("amplitude", self.amplitude)
        _positive("rate", self.rate)

    @classmethod
    def example(cls, n: float) -> "ClosedForm":
        """The worked example ``C_R(t) = n**3 * (1 - exp(-t))``."""
        return cls(amplitude=float(n) ** 3)

    @property
    def asymptote(self) -> float:
        return self.amplitude

    def __call__(self, t):
        return self.amplitude * -np.expm1(-self.rate * np.asarray(t, dtype=float))

    def closed_integral(self, T: float) -> float | None:
        return self.amplitude * _gap_exp(self.rate * T) / self.rate


ResolutionCostModel = Union[FromSize, ClosedForm]


def eval_resolution_cost(model: ResolutionCostModel, t):
    """Message cost of resolving a deadlock that has persisted for ``t``."""
    _check_time(t)
    out = model(t)
    return float(out) if np.ndim(out) == 0 else out


def integral_resolution_cost(
    model: ResolutionCostModel,
    T: float,
    method: Literal["auto", "closed", "quadrature"] = "auto",
    rel_tol: float = DEFAULT_REL_TOL,
) -> float:
    """``integral_0^T C_R(t) dt``.

    ``auto`` uses the antiderivative when the family has one and adaptive
    Simpson otherwise; the other two force a route, which is how the two are
    checked against each other.
    """
    _check_interval(T)
    if method not in ("auto", "closed", "quadrature"):
        raise DomainError(f"unknown integration method {method!r}")
    if method != "quadrature":
        value = model.closed_integral(T)
        if value is not None:
            return value
        if method == "closed":
            raise DomainError(f"{type(model).__name__} has no closed-form integral")
    return adaptive_simpson(lambda t: float(model(t)), 0.0, T, rel_tol=rel_tol)


def _check_interval(T: float) -> None:
    if not (isinstance(T, numbers.Real) and math.isfinite(T) and T > 0):
        raise DomainError(f"detection interval must be > 0 and finite, got {T!r}")


# ---------------------------------------------------------------------------
# Cost model and the cost functional
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CostModel:
    """Parameters of the long-run cost functional C(T).

    Attributes:
        detection_cost: messages per detection run (C_D).
        lam: deadlock formation rate of the Poisson process, 1/seconds.
        resolution: resolution cost as a function of persistence time.
        n: number of processes.
    """

    detection_cost: float
    lam: float
    resolution: ResolutionCostModel
    n: float

    def __post_init__(self) -> None:
        _positive("detection_cost", self.detection_cost)
        _positive("n", self.n)
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise DomainError(f"lambda must be finite and >= 0, got {self.lam!r}")

    def with_lambda(self, lam: float) -> "CostModel":
        return CostModel(self.detection_cost, lam, self.resolution, self.n)


def example_model(n: float, lam: float) -> CostModel:
    """``C_D = n**2`` and ``C_R(t) = n**3 * (1 - exp(-t))``."""
    return CostModel(detection_cost=float(n) ** 2, lam=lam, resolution=ClosedForm.example(n), n=n)


def sized_model(
    size: SizeModel,
    lam: float,
    preset: ComplexityPreset = MENDIVIL,
    c: float = 1.0,
    detection_cost: float | None = None,
) -> CostModel:
    """Cost model whose detection cost comes from ``preset`` unless given."""
    cd = preset.detection_cost(size.n) if detection_cost is None else detection_cost
    return CostModel(detection_cost=cd, lam=lam, resolution=FromSize(size, preset, c), n=size.n)


def mean_cost_rate(model: CostModel, T: float) -> float:
    """Long-run mean cost per unit time with detection every ``T`` seconds."""
    _check_interval(T)
    return model.detection_cost / T + model.lam * integral_resolution_cost(model.resolution, T) / T


def phi(model: CostModel, T: float) -> float:
    """``T**2 * C'(T)``: same sign as the slope of C, nondecreasing in T."""
    _check_interval(T)
    r = model.resolution
    return -model.detection_cost + model.lam * (T * float(r(T)) - integral_resolution_cost(r, T))


# ---------------------------------------------------------------------------
# Random (renewal) detection intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Deterministic:
    t: float

    def __post_init__(self) -> None:
        _positive("t", self.t)

    @property
    def mean(self) -> float:
        return self.t

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.t,)

    @property
    def upper(self) -> float:
        return self.t

    def survival(self, t):
        return np.where(np.asarray(t, dtype=float) < self.t, 1.0, 0.0)

    def tail_integral(self, x: float) -> float:
        return max(self.t - x, 0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.t)


@dataclass(frozen=True)
class Exponential:
    mean: float

    def __post_init__(self) -> None:
        _positive("mean", self.mean)

    breakpoints: tuple[float, ...] = field(default=(), init=False, repr=False)
    upper: float = field(default=math.inf, init=False, repr=False)

    def survival(self, t):
        return np.exp(-np.asarray(t, dtype=float) / self.mean)

    def tail_integral(self, x: float) -> float:
        return self.mean * math.exp(-x / self.mean)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(self.mean, size)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and 0 <= self.lo < self.hi):
            raise DomainError(f"uniform interval needs 0 <= lo < hi, got ({self.lo}, {self.hi})")

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.lo, self.hi) if self.lo > 0 else (self.hi,)

    @property
    def upper(self) -> float:
        return self.hi

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return np.clip((self.hi - t) / (self.hi - self.lo), 0.0, 1.0)

    def tail_integral(self, x: float) -> float:
        if x >= self.hi:
            return 0.0
        if x >= self.lo:
            return (self.hi - x) ** 2 / (2.0 * (self.hi - self.lo))
        return (self.lo - x) + 0.5 * (self.hi - self.lo)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class Gamma:
    shape: float
    scale: float

    def __post_init__(self) -> None:
        _positive("shape", self.shape)
        _positive("scale", self.scale)

    breakpoints: tuple[float, ...] = field(default=(), init=False, repr=False)
    upper: float = field(default=math.inf, init=False, repr=False)

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    def survival(self, t):
        return special.gammaincc(self.shape, np.asarray(t, dtype=float) / self.scale)

    def tail_integral(self, x: float) -> float:
        # E[(Y - x)+] = k*theta*Q(k+1, x/theta) - x*Q(k, x/theta)
        z = x / self.scale
        return float(
            self.shape * self.scale * special.gammaincc(self.shape + 1.0, z)
            - x * special.gammaincc(self.shape, z)
        )

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.gamma(self.shape, self.scale, size)


IntervalDistribution = Union[Deterministic, Exponential, Uniform, Gamma]


def random_schedule_cost(
    model: CostModel,
    dist: IntervalDistribution,
    method: Literal["auto", "quadrature"] = "auto",
    rel_tol: float = DEFAULT_REL_TOL,
) -> float:
    """Long-run mean cost when detection intervals are iid draws from ``dist``.

    ``C_H = (C_D + lambda * integral_0^inf C_R(t) * S(t) dt) / E[Y]`` where S
    is the survival function of the interval distribution. A deterministic
    interval goes through :func:`mean_cost_rate` so both agree exactly.
    """
    mu = dist.mean
    if method == "auto":
        if isinstance(dist, Deterministic):
            return mean_cost_rate(model, dist.t)
        r = model.resolution
        if isinstance(dist, Exponential) and isinstance(r, ClosedForm):
            x = r.rate * mu
            return model.detection_cost / mu + model.lam * r.amplitude * x / (1.0 + x)
    elif method != "quadrature":
        raise DomainError(f"unknown method {method!r}")
    weighted = _survival_weighted_integral(model.resolution, dist, rel_tol)
    return model.detection_cost / mu + model.lam * weighted / mu


def _survival_weighted_integral(r: ResolutionCostModel, dist: IntervalDistribution, rel_tol: float) -> float:
    def g(t: float) -> float:
        return float(r(t)) * float(dist.survival(t))

    if math.isfinite(dist.upper):
        knots = [0.0] + [b for b in dist.breakpoints if b > 0]
        parts = [adaptive_simpson(g, a, b, rel_tol=rel_tol) for a, b in zip(knots, knots[1:])]
        return math.fsum(parts)

    c_inf = r.asymptote
    parts = []
    a, b = 0.0, dist.mean
    for _ in range(2000):
        parts.append(adaptive_simpson(g, a, b, rel_tol=rel_tol))
        acc = math.fsum(parts)
        if c_inf * dist.tail_integral(b) <= TAIL_REL_TOL * acc:
            return acc
        a, b = b, 2.0 * b
    raise NumericalError(
        f"survival-weighted integral did not reach its tail bound by t={b!r} "
        f"(tail bound {c_inf * dist.tail_integral(b):.3e}, partial {acc:.3e})"
    )
