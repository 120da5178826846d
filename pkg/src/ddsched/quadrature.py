"""Adaptive Simpson integration with a relative tolerance target."""

from __future__ import annotations

import math
from collections.abc import Callable

from .errors import QuadratureError

DEFAULT_REL_TOL = 1e-10
DEFAULT_MAX_DEPTH = 60
# Panels used for the coarse pass that fixes the absolute error budget.
_SEED_PANELS = 8


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float = DEFAULT_REL_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> float:
    """Integrate ``f`` over ``[a, b]`` by recursive interval bisection.

    The absolute error budget is ``rel_tol`` times the magnitude of a coarse
    composite Simpson estimate, then split evenly across the bisection tree.
    The traversal order is fixed, so results are reproducible bit-for-bit.

    Raises:
        QuadratureError: if a subinterval still misses its budget at
            ``max_depth`` or the integrand produces a non-finite value.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"integration bounds must be finite, got [{a}, {b}]")
    if a == b:
        return 0.0
    if a > b:
        return -adaptive_simpson(f, b, a, rel_tol, max_depth)

    h = (b - a) / _SEED_PANELS
    xs = [a + i * h for i in range(_SEED_PANELS)] + [b]
    fx = [_checked(f, x) for x in xs]
    mids = [_checked(f, 0.5 * (xs[i] + xs[i + 1])) for i in range(_SEED_PANELS)]
    wholes = [
        (xs[i + 1] - xs[i]) / 6.0 * (fx[i] + 4.0 * mids[i] + fx[i + 1])
        for i in range(_SEED_PANELS)
    ]
    scale = math.fsum(abs(w) for w in wholes)
    if scale == 0.0:
        # Could be an integrand that vanishes on the seed points only; fall
        # back to an absolute budget tied to the interval length.
        scale = (b - a) * max(abs(v) for v in fx + mids + [1e-300])
    tol = rel_tol * scale / _SEED_PANELS

    pieces = []
    for i in range(_SEED_PANELS):
        pieces.append(
            _refine(f, xs[i], xs[i + 1], fx[i], mids[i], fx[i + 1], wholes[i], tol, 0, max_depth)
        )
    return math.fsum(pieces)


def _checked(f: Callable[[float], float], x: float) -> float:
    y = float(f(x))
    if not math.isfinite(y):
        raise QuadratureError(f"integrand is not finite at t={x!r} (value {y!r})")
    return y


def _refine(f, a, b, fa, fm, fb, whole, tol, depth, max_depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = _checked(f, lm)
    frm = _checked(f, rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    if depth >= max_depth or m <= a or m >= b:
        raise QuadratureError(
            f"adaptive Simpson did not converge on [{a!r}, {b!r}] at depth {depth}: "
            f"local error {abs(delta) / 15.0:.3e} exceeds budget {tol:.3e}"
        )
    return _refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, max_depth) + _refine(
        f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, max_depth
    )
