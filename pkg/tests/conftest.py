import math

import pytest
from hypothesis import strategies as st

from ddsched.cost_model import (
    ClosedForm,
    CostModel,
    FromSize,
    Polynomial,
    Saturating,
    SqrtSaturating,
    get_preset,
)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Collect one pass/fail line per acceptance criterion."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" -- {detail}" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def example_phi(n: float, lam: float, T: float) -> float:
    """Hand-simplified phi for the example model."""
    return -n * n + lam * n**3 * (1.0 - (1.0 + T) * math.exp(-T))


def example_cost(n: float, lam: float, T: float) -> float:
    return (n * n + lam * n**3 * (T + math.exp(-T) - 1.0)) / T


@st.composite
def resolution_models(draw):
    n = draw(st.floats(2.0, 2000.0))
    kind = draw(st.sampled_from(["closed", "saturating", "sqrt", "polynomial"]))
    rate = draw(st.floats(0.05, 20.0))
    if kind == "closed":
        return ClosedForm(amplitude=n**3, rate=rate)
    if kind == "saturating":
        size = Saturating(n, rate)
    elif kind == "sqrt":
        size = SqrtSaturating(n, rate)
    else:
        coeffs = [draw(st.floats(0.01, 10.0))] + draw(st.lists(st.floats(0.0, 5.0), max_size=3))
        size = Polynomial(n, tuple(coeffs), relative=draw(st.booleans()))
    return FromSize(size, get_preset("worst-case"), c=draw(st.floats(0.1, 10.0)))


@st.composite
def cost_models(draw, min_lam=0.0):
    r = draw(resolution_models())
    n = r.n if isinstance(r, FromSize) else round(r.amplitude ** (1 / 3), 9)
    cd = draw(st.floats(0.5, 4.0)) * n * n
    lam = draw(st.floats(min_lam, 10.0))
    return CostModel(detection_cost=cd, lam=lam, resolution=r, n=n)
