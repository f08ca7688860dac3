"""Resilience rates of dynamic risk evaluations driven by backward SDEs.

A numpy/scipy library plus CLI that simulates risk-factor paths, evaluates
dynamic risk measures and their resilience rates two independent ways
(finite differences of the risk trajectory vs. the expected-generator
representation), and evaluates a set of built-in scenarios at desk scale.
"""

__version__ = "0.1.0"

import os as _os

# RESLAB_THREADS caps worker parallelism. BLAS pools size themselves when the
# numerics libraries first load, so the cap must land before the imports
# below; explicit OMP_NUM_THREADS-style settings still win.
_cap = _os.environ.get("RESLAB_THREADS", "")
if _cap.isdigit() and int(_cap) >= 1:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _cap)
del _os, _cap

from .stochastic_core import (
    TimeGrid,
    NoiseBundle,
    StatePaths,
    StoppingSample,
    make_time_grid,
    sample_noise,
    simulate_gbm,
    simulate_vasicek,
    simulate_jump_gbm,
    first_hitting,
)
from .risk_closed_forms import (
    PiecewiseConstant,
    GaussianClaimSpec,
    BSPutSpec,
    VasicekBondSpec,
    var_value,
    es_value,
    var_rate,
    es_rate,
    bs_put_price,
    bs_put_rate_t,
    vasicek_bond_price,
    vasicek_rate_t,
    entropic_value,
    exp_payoff_rate,
)
from .bsde_engine import (
    Driver,
    SolutionSample,
    RateEstimate,
    builtin_drivers,
    lsmc_solve,
    rate_driver_expectation,
    rate_finite_difference,
    rate_conditional,
)
from .scenario_lab import (
    SCENARIO_IDS,
    ScenarioConfig,
    ScenarioReport,
    make_config,
    run_scenario,
    write_report,
)
from .resilience_toolkit import (
    AcceptanceQuery,
    Acceptability,
    RateCurve,
    is_acceptable,
    min_acceptance_level,
    acceptance_family_properties,
    resilience_neutral_driver,
    rra,
    adjusted_risk_paths,
    adjusted_risk_expansion_check,
)

__all__ = [
    "__version__",
    "TimeGrid",
    "NoiseBundle",
    "StatePaths",
    "StoppingSample",
    "make_time_grid",
    "sample_noise",
    "simulate_gbm",
    "simulate_vasicek",
    "simulate_jump_gbm",
    "first_hitting",
    "PiecewiseConstant",
    "GaussianClaimSpec",
    "BSPutSpec",
    "VasicekBondSpec",
    "var_value",
    "es_value",
    "var_rate",
    "es_rate",
    "bs_put_price",
    "bs_put_rate_t",
    "vasicek_bond_price",
    "vasicek_rate_t",
    "entropic_value",
    "exp_payoff_rate",
    "Driver",
    "SolutionSample",
    "RateEstimate",
    "builtin_drivers",
    "lsmc_solve",
    "rate_driver_expectation",
    "rate_finite_difference",
    "rate_conditional",
    "SCENARIO_IDS",
    "ScenarioConfig",
    "ScenarioReport",
    "make_config",
    "run_scenario",
    "write_report",
    "AcceptanceQuery",
    "Acceptability",
    "RateCurve",
    "is_acceptable",
    "min_acceptance_level",
    "acceptance_family_properties",
    "resilience_neutral_driver",
    "rra",
    "adjusted_risk_paths",
    "adjusted_risk_expansion_check",
]
