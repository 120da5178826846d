"""Cost model, optimizer and Monte Carlo simulator for deadlock detection scheduling."""

__version__ = "0.1.0"

from .cost_model import (
    PRESETS,
    ClosedForm,
    ComplexityPreset,
    CostModel,
    Deterministic,
    Exponential,
    FromSize,
    Gamma,
    Polynomial,
    Saturating,
    SqrtSaturating,
    Uniform,
    eval_resolution_cost,
    eval_size,
    example_model,
    integral_resolution_cost,
    mean_cost_rate,
    phi,
    random_schedule_cost,
    sized_model,
)
from .errors import DomainError, NumericalError, QuadratureError
from .optimizer import (
    OptimizeResult,
    SlopeFit,
    asymptotic_interval,
    fit_asymptotic_slope,
    linear_size_family,
    solve_optimal_interval,
    sweep_table,
)
from .simulator import (
    CycleOutcome,
    Fixed,
    Renewal,
    SimEstimate,
    compare_policies,
    estimate_cost_rate,
    simulate_cycle,
)
