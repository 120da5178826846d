"""Optimal detection interval, parameter sweeps and the asymptotic scale law."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cost_model import (
    MENDIVIL,
    ComplexityPreset,
    CostModel,
    FromSize,
    Polynomial,
    mean_cost_rate,
    phi,
    sized_model,
)
from .errors import DomainError, NumericalError

DEFAULT_T_MAX = 1e6
DEFAULT_REL_TOL = 1e-9
BRACKET_GROWTH = 4.0

CONVERGED = "converged"
NO_INTERIOR_OPTIMUM = "no_interior_optimum"
NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class OptimizeResult:
    """Outcome of :func:`solve_optimal_interval`.

    ``status`` is ``"converged"`` or ``"no_interior_optimum"`` (the cost is
    still decreasing at ``t_max``, so there is no finite minimiser); sweeps
    may also record ``"numerical_error"``. Only converged results carry
    ``t_star``, ``cost_at_optimum``, ``bracket`` and ``residual``.
    """

    status: str
    t_star: float | None = None
    cost_at_optimum: float | None = None
    bracket: tuple[float, float] | None = None
    iterations: int = 0
    residual: float | None = None
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def asymptotic_interval(n: float, lam: float) -> float:
    """Scale-law estimate ``(lam * n) ** (-1/3)``.

    Order of magnitude only; the constant factor depends on the model.
    """
    if not (n >= 1 and math.isfinite(n)):
        raise DomainError(f"n must be >= 1, got {n!r}")
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError(f"lambda must be > 0, got {lam!r}")
    return (lam * n) ** (-1.0 / 3.0)


def solve_optimal_interval(
    model: CostModel,
    t_max: float = DEFAULT_T_MAX,
    rel_tol: float = DEFAULT_REL_TOL,
) -> OptimizeResult:
    """Minimise C(T) by bisection on the monotone sign function ``phi``.

    The bracket is seeded at the scale-law guess and grown geometrically
    until ``phi(lo) <= 0 <= phi(hi)``; bisection stops when
    ``hi - lo <= rel_tol * hi``.
    """
    if not (math.isfinite(t_max) and t_max > 0):
        raise DomainError(f"t_max must be > 0, got {t_max!r}")
    if not (0 < rel_tol <= 1e-2):
        raise DomainError(f"rel_tol must lie in (0, 1e-2], got {rel_tol!r}")

    if model.lam == 0 or phi(model, t_max) <= 0:
        return OptimizeResult(status=NO_INTERIOR_OPTIMUM, message=f"cost still decreasing at t_max={t_max!r}")

    guess = min(asymptotic_interval(model.n, model.lam), t_max)
    iterations = 0
    if phi(model, guess) <= 0:
        lo, hi = guess, min(guess * BRACKET_GROWTH, t_max)
        while phi(model, hi) < 0:
            lo, hi = hi, min(hi * BRACKET_GROWTH, t_max)
            iterations += 1
    else:
        lo, hi = guess / BRACKET_GROWTH, guess
        while phi(model, lo) > 0:
            lo, hi = lo / BRACKET_GROWTH, lo
            iterations += 1
            if lo < 1e-300:
                raise NumericalError("lower bracket underflowed while phi stayed positive")

    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if phi(model, mid) <= 0:
            lo = mid
        else:
            hi = mid
        iterations += 1

    t_star = 0.5 * (lo + hi)
    return OptimizeResult(
        status=CONVERGED,
        t_star=t_star,
        cost_at_optimum=mean_cost_rate(model, t_star),
        bracket=(lo, hi),
        iterations=iterations,
        residual=abs(phi(model, t_star)) / model.detection_cost,
    )


@dataclass(frozen=True)
class SweepRow:
    n: float
    lam: float
    result: OptimizeResult


def _solve_row(model: CostModel, t_max: float, rel_tol: float) -> SweepRow:
    try:
        result = solve_optimal_interval(model, t_max=t_max, rel_tol=rel_tol)
    except NumericalError as exc:
        result = OptimizeResult(status=NUMERICAL_ERROR, message=str(exc))
    return SweepRow(n=model.n, lam=model.lam, result=result)


def sweep_table(
    models: Sequence[CostModel],
    t_max: float = DEFAULT_T_MAX,
    rel_tol: float = DEFAULT_REL_TOL,
    workers: int = 1,
) -> list[SweepRow]:
    """Solve every model independently; rows keep the input order."""
    if workers <= 1:
        return [_solve_row(m, t_max, rel_tol) for m in models]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda m: _solve_row(m, t_max, rel_tol), models))


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through ``(log(lam * n), log(T*))``."""

    points: list[tuple[float, float]]
    slope: float
    intercept: float
    max_residual: float


def linear_size_family(
    c1: float = 1.0,
    c: float = 1.0,
    preset: ComplexityPreset = MENDIVIL,
) -> Callable[[float, float], CostModel]:
    """Models with ``n_D(t) = n * min(1, c1 * t)`` and ``C_R = c * n * n_D**2``."""

    def build(n: float, lam: float) -> CostModel:
        return sized_model(Polynomial(n=n, coeffs=(c1,), relative=True), lam, preset=preset, c=c)

    return build


def fit_asymptotic_slope(
    family: Callable[[float, float], CostModel],
    n_values: Sequence[float],
    lam: float,
    t_max: float = DEFAULT_T_MAX,
    rel_tol: float = DEFAULT_REL_TOL,
) -> SlopeFit:
    """Fit the log-log slope of the optimal interval against ``lam * n``.

    ``family(n, lam)`` must build a model on a polynomial size function. Every
    solved interval must be finite and below 1 s, the small-interval regime in
    which the power law is expected to hold.
    """
    ns = sorted(float(n) for n in n_values)
    if len(ns) < 4:
        raise DomainError(f"need at least 4 n-values, got {len(ns)}")
    if ns[0] <= 0 or ns[-1] / ns[0] < 1e3:
        raise DomainError("n-values must be positive and span at least 3 decades")
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError(f"lambda must be > 0, got {lam!r}")

    points = []
    for n in ns:
        model = family(n, lam)
        if not (isinstance(model.resolution, FromSize) and isinstance(model.resolution.size, Polynomial)):
            raise DomainError("slope fitting needs a polynomial size model")
        res = solve_optimal_interval(model, t_max=t_max, rel_tol=rel_tol)
        if not res.converged:
            raise NumericalError(f"no interior optimum at n={n!r}; asymptotic regime not reached")
        if res.t_star >= 1.0:
            raise NumericalError(f"T*={res.t_star!r} >= 1 at n={n!r}; asymptotic regime not reached")
        points.append((math.log(lam * n), math.log(res.t_star)))

    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return SlopeFit(points=points, slope=float(slope), intercept=float(intercept), max_residual=float(np.max(np.abs(resid))))
