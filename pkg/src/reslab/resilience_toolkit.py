"""Acceptance sets for the resilience rate, driver neutralization, and the
rate-based risk adjustment.

A claim is acceptable at level ``a`` when its rate does not exceed ``a``; the
whole family of such sets inherits cash-insensitivity and positive
homogeneity from the driver. The rate curve t ↦ ρ̇_t in turn defines a
drift correction of the driver (making the rate vanish) and a running
adjustment ∫ c_s·ρ̇_s ds that can be added to the risk evaluation itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bsde_engine import (
    Driver,
    RateEstimate,
    SolutionSample,
    rate_driver_expectation,
    rate_finite_difference,
)
from .stochastic_core import StoppingSample, TimeGrid

__all__ = [
    "AcceptanceQuery",
    "Acceptability",
    "ExpansionCheck",
    "FamilyCheck",
    "RateCurve",
    "acceptance_family_properties",
    "adjusted_risk_paths",
    "adjusted_risk_expansion_check",
    "is_acceptable",
    "min_acceptance_level",
    "rra",
    "resilience_neutral_driver",
]


# ------------------------------------------------------------------- curves


@dataclass(frozen=True)
class RateCurve:
    """A rate sampled on a time grid, read as a piecewise-linear function.

    Outside the knot range the curve extends as a constant, so integration up
    to the horizon is always defined. ``horizon`` is the terminal time T the
    remaining-time integrals run to.
    """

    times: np.ndarray
    values: np.ndarray
    horizon: float

    def __post_init__(self) -> None:
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or times.shape != values.shape or times.size == 0:
            raise ValueError("times and values must be equal-length 1-d arrays")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if times[0] < 0.0 or times[-1] >= self.horizon:
            raise ValueError(
                f"times must lie in [0, horizon={self.horizon}), "
                f"got [{times[0]}, {times[-1]}]"
            )
        if not np.isfinite(values).all():
            raise ValueError("curve values must be finite")

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def integral(self, a: float, b: float) -> float:
        """∫ₐᵇ of the interpolant (exact for the piecewise-linear curve)."""
        if b < a:
            raise ValueError(f"need a <= b, got [{a}, {b}]")
        if b == a:
            return 0.0
        inner = self.times[(self.times > a) & (self.times < b)]
        knots = np.concatenate([[a], inner, [b]])
        return float(np.trapezoid(self(knots), knots))

    def remaining_integral(self, t: float) -> float:
        """∫ₜᵀ of the curve, the drift budget left before the horizon."""
        if not 0.0 <= t <= self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        return self.integral(t, self.horizon)


# -------------------------------------------------------------- acceptance


@dataclass(frozen=True)
class AcceptanceQuery:
    """Membership query: level in €/year (±inf allowed) at a fixed time."""

    level: float
    t: float

    def __post_init__(self) -> None:
        if math.isnan(self.level):
            raise ValueError("level must not be NaN (use ±inf for the sentinels)")
        if not 0.0 <= self.t < math.inf:
            raise ValueError(f"t must be a finite nonnegative time, got {self.t}")


@dataclass(frozen=True)
class Acceptability:
    """Membership verdict with a noise-awareness flag.

    ``marginal`` is set when the estimate sits within 2 standard errors of
    the level, i.e. the boolean could flip under resampling.
    """

    acceptable: bool
    marginal: bool
    level: float
    rate_value: float

    def __bool__(self) -> bool:
        return self.acceptable


def is_acceptable(rate: RateEstimate, query: AcceptanceQuery) -> Acceptability:
    """Whether the rate estimate passes the level: value ≤ a, with a 2·SE band.

    The sentinels work out of the box: a = +inf accepts every defined rate,
    a = −inf accepts no finite one, and neither is ever marginal.
    """
    if math.isnan(rate.value):
        raise ValueError("rate estimate is undefined (NaN)")
    acceptable = rate.value <= query.level
    marginal = abs(rate.value - query.level) < 2.0 * rate.std_error
    return Acceptability(
        acceptable=acceptable,
        marginal=marginal,
        level=query.level,
        rate_value=rate.value,
    )


def min_acceptance_level(rate: RateEstimate) -> float:
    """The smallest level that accepts the claim: the rate itself."""
    if math.isnan(rate.value):
        raise ValueError("rate estimate is undefined (NaN)")
    return rate.value


@dataclass(frozen=True)
class FamilyCheck:
    """One row of the acceptance-family report."""

    prop: str  # "cash_insensitive" or "positively_homogeneous"
    level: float
    passed: bool
    detail: str


def acceptance_family_properties(
    driver: Driver,
    solution: SolutionSample,
    at: float | StoppingSample,
    levels: Sequence[float] = (-1.0, 0.0, 1.0),
    level_scale: float = 1.0,
    shift: float | None = None,
    alpha: float = 2.0,
) -> list[FamilyCheck]:
    """Empirical membership checks for the acceptance family on one scenario.

    Cash-insensitivity holds for y-independent drivers, where shifting the
    claim shifts ρ but leaves (Z, U) untouched — the check rebuilds the
    shifted solution on the same noise and compares membership level by
    level. Positive homogeneity likewise rescales (ρ, Z, U) by α when the
    driver is positively homogeneous and compares membership of αX at α·a.
    Drivers without the structural flag get a failing row explaining why
    the family property has no basis.
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    h = level_scale if shift is None else shift
    base = rate_driver_expectation(driver, solution, at)
    report: list[FamilyCheck] = []

    def shifted(factor: float = 1.0, offset: float = 0.0) -> SolutionSample:
        return SolutionSample(
            grid=solution.grid,
            rho=factor * solution.rho + offset,
            z=factor * solution.z,
            u_surrogate=None
            if solution.u_surrogate is None
            else factor * solution.u_surrogate,
            state=solution.state,
        )

    for raw in levels:
        a = raw * level_scale
        if driver.y_independent:
            after = rate_driver_expectation(driver, shifted(offset=h), at)
            passed = (base.value <= a) == (after.value <= a)
            detail = (
                f"rate {base.value:.6g} -> {after.value:.6g} under a "
                f"cash shift of {h:g}"
            )
        else:
            passed = False
            detail = "driver depends on y, so the family is not cash-insensitive"
        report.append(FamilyCheck("cash_insensitive", a, passed, detail))

    for raw in levels:
        a = raw * level_scale
        if driver.positively_homogeneous:
            after = rate_driver_expectation(driver, shifted(factor=alpha), at)
            passed = (base.value <= a) == (after.value <= alpha * a)
            detail = (
                f"rate {base.value:.6g} scales to {after.value:.6g} "
                f"under alpha={alpha:g}"
            )
        else:
            passed = False
            detail = (
                "driver is not positively homogeneous, so the family does "
                "not rescale"
            )
        report.append(FamilyCheck("positively_homogeneous", a, passed, detail))
    return report


# ------------------------------------------------------------ neutral driver


def resilience_neutral_driver(base: Driver, rate_curve: RateCurve) -> Driver:
    """Drift-correct the driver so the induced rate vanishes.

    g̃(t, y, z, u) = g(t, y − ∫ₜᵀ ρ̇ₛ ds, z, u) + ρ̇ₜ. The y-shift undoes the
    adjustment carried by the corrected risk evaluation, so the same (Z, U)
    solve the corrected equation; for a y-independent base this collapses to
    g + ρ̇. The additive term breaks positive homogeneity, all other
    structural flags survive.
    """

    if base.needs_state:

        def evaluate(t, y, z, u, state):
            y_adj = np.asarray(y, dtype=float) - rate_curve.remaining_integral(t)
            return base.evaluate(t, y_adj, z, u, state) + rate_curve(t)

    else:

        def evaluate(t, y, z, u):
            y_adj = np.asarray(y, dtype=float) - rate_curve.remaining_integral(t)
            return base.evaluate(t, y_adj, z, u) + rate_curve(t)

    return Driver(
        name=f"neutral[{base.name}]",
        evaluate=evaluate,
        y_independent=base.y_independent,
        positively_homogeneous=False,
        convex_in_y=base.convex_in_y,
        nondecreasing_in_y=base.nondecreasing_in_y,
        regularity=base.regularity,
        jump_aware=base.jump_aware,
        needs_state=base.needs_state,
        probe_domain_positive=base.probe_domain_positive,
    )


# ------------------------------------------------------------ the adjustment


def _c_on(times: np.ndarray, c) -> np.ndarray:
    if callable(c):
        out = np.asarray(c(times), dtype=float)
        if out.shape != times.shape:
            out = np.broadcast_to(out, times.shape).astype(float)
    elif np.ndim(c) == 0:
        out = np.full(times.shape, float(c))
    else:
        out = np.asarray(c, dtype=float)
        if out.shape != times.shape:
            raise ValueError(
                f"c grid must align with the curve times {times.shape}, "
                f"got {out.shape}"
            )
    if not np.isfinite(out).all():
        raise ValueError("c must be finite (bounded) on the grid")
    return out


def rra(rate_curve: RateCurve, c, t: float) -> float:
    """Remaining adjustment ∫ₜᵀ c_s·ρ̇ₛ ds under the trapezoid rule.

    ``c`` may be a bounded callable of time, a scalar, or an array aligned
    with the curve grid. The product c·ρ̇ is formed on the curve knots and
    integrated as a piecewise-linear function, which makes the adjustment
    exactly additive across aligned subintervals.
    """
    cv = _c_on(rate_curve.times, c)
    product = RateCurve(
        times=rate_curve.times,
        values=cv * rate_curve.values,
        horizon=rate_curve.horizon,
    )
    return product.remaining_integral(t)


def adjusted_risk_paths(
    rho: np.ndarray, grid: TimeGrid, rate_curve: RateCurve, c
) -> np.ndarray:
    """ρᶜ per path and slice: the risk evaluation plus the remaining
    adjustment, ρᶜ_t = ρ_t + ∫ₜᵀ c·ρ̇ ds (exact by construction)."""
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[1] != grid.n_steps + 1:
        raise ValueError("rho must have shape (n_paths, n_steps + 1)")
    offsets = np.array([rra(rate_curve, c, t) for t in grid.times])
    return rho + offsets[None, :]


@dataclass(frozen=True)
class ExpansionCheck:
    """Observed short-time drift of the adjusted evaluation vs its target."""

    estimate: RateEstimate  # finite-difference slope of E[ρᶜ] at s
    target: float  # (1 − c_s)·ρ̇_s from the rate curve
    band: float  # acceptance band applied to |estimate − target|
    passed: bool


def adjusted_risk_expansion_check(
    rho: np.ndarray,
    grid: TimeGrid,
    rate_curve: RateCurve,
    c,
    s: float,
    t_offsets: Sequence[float] | None = None,
    band_se: float = 4.0,
) -> ExpansionCheck:
    """Verify E[ρᶜ_t] − E[ρᶜ_s] = (1 − c_s)·ρ̇_s·(t − s) + O((t−s)²).

    The left side is measured by the finite-difference rate estimator on the
    adjusted paths (per-path difference quotients, extrapolated to zero
    offset), the right side read off the rate curve. Full adjustment c ≡ 1
    makes the target zero — the adjusted evaluation is then drift-free to
    first order; c ≡ 0 recovers the raw expansion.
    """
    adjusted = adjusted_risk_paths(rho, grid, rate_curve, c)
    estimate = rate_finite_difference(adjusted, at=s, epsilons=t_offsets, grid=grid)
    c_s = float(_c_on(np.atleast_1d(np.asarray(s, dtype=float)), c)[0])
    target = (1.0 - c_s) * float(rate_curve(s))
    band = band_se * estimate.std_error
    passed = abs(estimate.value - target) <= band
    return ExpansionCheck(estimate=estimate, target=target, band=band, passed=passed)
