"""Long-run portfolio growth under floor and drawdown constraints.

Simulate wealth strategies on discrete time grids, transform them so the
constrained versions satisfy their floors by construction, estimate
certainty equivalent growth rates by Monte Carlo, and compare against
closed forms.
"""

from .cer import (
    HorizonGrid,
    SandwichReport,
    SweepReport,
    UtilityEstimate,
    certainty_equivalent_loss,
    estimate_expected_utility,
    fit_rate,
    floor_gap_bound,
    gap_profile,
    long_run_gap,
    sandwich_check,
    sweep_expected_utility,
)
from .constraints import (
    DrawdownWealth,
    FloorSpec,
    FloorWealth,
    ShiftedWealth,
    drawdown_optimal,
    floor_optimal,
    shift_floor,
    validate_drawdown,
    validate_floor,
)
from .errors import (
    ConfigError,
    DomainError,
    EstimateError,
    GrowthLabError,
    InvalidDrawdownError,
    NumericError,
    StructuralError,
)
from .market import (
    CoefficientSchedule,
    ConstantWealth,
    MertonWealth,
    NoiseBlock,
    ScaledWealth,
    ValueFunctionQuery,
    closed_form_value,
    merton_fractions,
    merton_wealth,
    simulate_assets,
    state_price_density,
)
from .paths import DiscretePath, MaxPath, TimeGrid, running_max
from .transforms import (
    DrawdownSpec,
    LinearDrawdown,
    ScalePair,
    SmoothIncreasingFn,
    TabulatedDrawdown,
    azema_yor,
    build_scale_pair,
    implied_floor_of_max,
    linear_drawdown_scale,
)
from .utility import PowerUtility, gamma_for_power, register_utility, signed_log

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "TimeGrid",
    "DiscretePath",
    "MaxPath",
    "running_max",
    "SmoothIncreasingFn",
    "LinearDrawdown",
    "TabulatedDrawdown",
    "DrawdownSpec",
    "ScalePair",
    "azema_yor",
    "build_scale_pair",
    "linear_drawdown_scale",
    "implied_floor_of_max",
    "PowerUtility",
    "signed_log",
    "gamma_for_power",
    "register_utility",
    "CoefficientSchedule",
    "NoiseBlock",
    "ValueFunctionQuery",
    "closed_form_value",
    "simulate_assets",
    "state_price_density",
    "merton_fractions",
    "merton_wealth",
    "MertonWealth",
    "ConstantWealth",
    "ScaledWealth",
    "FloorSpec",
    "shift_floor",
    "floor_optimal",
    "drawdown_optimal",
    "validate_floor",
    "validate_drawdown",
    "ShiftedWealth",
    "FloorWealth",
    "DrawdownWealth",
    "HorizonGrid",
    "UtilityEstimate",
    "SweepReport",
    "SandwichReport",
    "estimate_expected_utility",
    "sweep_expected_utility",
    "fit_rate",
    "long_run_gap",
    "gap_profile",
    "floor_gap_bound",
    "certainty_equivalent_loss",
    "sandwich_check",
    "GrowthLabError",
    "StructuralError",
    "DomainError",
    "InvalidDrawdownError",
    "NumericError",
    "EstimateError",
    "ConfigError",
]
