import math

import pytest

from ddsched.errors import QuadratureError
from ddsched.quadrature import adaptive_simpson


@pytest.mark.parametrize(
    "f, a, b, exact",
    [
        (math.exp, 0.0, 1.0, math.e - 1.0),
        (math.sin, 0.0, math.pi, 2.0),
        (lambda t: t**5, 0.0, 2.0, 64.0 / 6.0),
        (lambda t: 1.0 / (1.0 + t * t), 0.0, 50.0, math.atan(50.0)),
    ],
)
def test_known_integrals(f, a, b, exact):
    assert adaptive_simpson(f, a, b) == pytest.approx(exact, rel=1e-10)


def test_reversed_and_empty_interval():
    assert adaptive_simpson(math.exp, 1.0, 0.0) == pytest.approx(1.0 - math.e, rel=1e-10)
    assert adaptive_simpson(math.exp, 3.0, 3.0) == 0.0


def test_deterministic():
    f = lambda t: math.sqrt(t) * math.exp(-t)
    assert adaptive_simpson(f, 0.0, 7.0) == adaptive_simpson(f, 0.0, 7.0)


def test_non_finite_integrand_raises():
    with pytest.raises(QuadratureError):
        adaptive_simpson(lambda t: 1.0 / (t - 0.5) if t != 0.5 else math.inf, 0.0, 1.0)


def test_depth_limit_raises_with_diagnostics():
    # a jump the recursion cannot resolve within 3 levels
    with pytest.raises(QuadratureError, match="did not converge"):
        adaptive_simpson(lambda t: 0.0 if t < 0.3 else 1.0, 0.0, 1.0, max_depth=3)
