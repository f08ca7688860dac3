"""Tests for acceptance sets, driver neutralization, and the risk adjustment."""

import math

import numpy as np
import pytest

from reslab.bsde_engine import (
    RateEstimate,
    SolutionSample,
    bond_driver,
    linear_brownian_driver,
    rate_driver_expectation,
    zero_driver,
)
from reslab.resilience_toolkit import (
    Acceptability,
    AcceptanceQuery,
    RateCurve,
    acceptance_family_properties,
    adjusted_risk_expansion_check,
    adjusted_risk_paths,
    is_acceptable,
    min_acceptance_level,
    rra,
    resilience_neutral_driver,
)
from reslab.risk_closed_forms import (
    VasicekBondSpec,
    vasicek_bond_price,
    vasicek_rate_t,
)
from reslab.stochastic_core import make_time_grid, sample_noise, simulate_vasicek

FIG2 = VasicekBondSpec(r0=0.02, a=1.0, b=0.02, sigma=0.01, horizon=1.0)


def estimate(value, se=0.0):
    return RateEstimate(value=value, std_error=se, method="closed_form")


def vasicek_solution(n_paths, seed, n_steps=64):
    """Exact bond-price paths on simulated short rates (z unused by the driver)."""
    grid = make_time_grid(FIG2.horizon, n_steps)
    noise = sample_noise(grid, n_paths, seed=seed)
    states = simulate_vasicek(grid, FIG2.r0, FIG2.a, FIG2.b, FIG2.sigma, noise)
    rho = np.column_stack(
        [
            vasicek_bond_price(FIG2, t, states.values[:, k])
            for k, t in enumerate(grid.times)
        ]
    )
    return SolutionSample(grid=grid, rho=rho, z=np.zeros_like(rho), state=states.values)


def exact_rate_curve(grid):
    times = grid.times[:-1]
    return RateCurve(
        times=times,
        values=np.array([vasicek_rate_t(FIG2, t) for t in times]),
        horizon=FIG2.horizon,
    )


def flat_solution(n_paths=4, n_steps=4, value=1.0):
    grid = make_time_grid(1.0, n_steps)
    rho = np.full((n_paths, grid.n_steps + 1), value)
    return SolutionSample(grid=grid, rho=rho, z=np.zeros_like(rho))


# ------------------------------------------------------------------ RateCurve


class TestRateCurve:
    def test_interpolation_hits_knots_and_midpoints(self):
        curve = RateCurve(times=[0.0, 0.2, 0.6], values=[1.0, 3.0, -1.0], horizon=1.0)
        assert curve(0.2) == 3.0
        assert curve(0.1) == pytest.approx(2.0, rel=0, abs=1e-15)
        assert curve(0.4) == pytest.approx(1.0, rel=0, abs=1e-15)

    def test_constant_extension_outside_knots(self):
        curve = RateCurve(times=[0.2, 0.6], values=[5.0, -3.0], horizon=1.0)
        assert curve(0.0) == 5.0
        assert curve(0.9) == -3.0

    def test_integral_matches_hand_trapezoid(self):
        curve = RateCurve(
            times=[0.2, 0.4, 0.6], values=[1.0, 2.0, 0.5], horizon=1.0
        )
        knots = np.array([0.1, 0.2, 0.4, 0.6, 0.8])
        hand = np.trapezoid(curve(knots), knots)
        assert curve.integral(0.1, 0.8) == pytest.approx(hand, rel=1e-15)

    def test_integral_additive_across_splits(self):
        curve = RateCurve(
            times=[0.0, 0.3, 0.7], values=[2.0, -1.0, 4.0], horizon=1.0
        )
        whole = curve.integral(0.05, 0.95)
        for m in (0.3, 0.5, 0.7, 0.51234):
            parts = curve.integral(0.05, m) + curve.integral(m, 0.95)
            assert parts == pytest.approx(whole, rel=1e-12)

    def test_integral_degenerate_and_reversed(self):
        curve = RateCurve(times=[0.0, 0.5], values=[1.0, 1.0], horizon=1.0)
        assert curve.integral(0.3, 0.3) == 0.0
        with pytest.raises(ValueError, match="a <= b"):
            curve.integral(0.5, 0.2)

    def test_remaining_integral_runs_to_horizon(self):
        # constant curve: remaining mass is value * (T - t), extension included
        curve = RateCurve(times=[0.0, 0.25], values=[2.0, 2.0], horizon=1.0)
        assert curve.remaining_integral(0.4) == pytest.approx(1.2, rel=1e-14)
        with pytest.raises(ValueError, match="outside"):
            curve.remaining_integral(1.5)

    def test_validation(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            RateCurve(times=[0.0, 0.0], values=[1.0, 2.0], horizon=1.0)
        with pytest.raises(ValueError, match="horizon"):
            RateCurve(times=[0.0, 1.0], values=[1.0, 2.0], horizon=1.0)
        with pytest.raises(ValueError, match="equal-length"):
            RateCurve(times=[0.0, 0.5], values=[1.0], horizon=1.0)
        with pytest.raises(ValueError, match="finite"):
            RateCurve(times=[0.0, 0.5], values=[1.0, np.nan], horizon=1.0)


# ----------------------------------------------------------- acceptance sets


class TestAcceptance:
    def test_query_validation(self):
        AcceptanceQuery(level=math.inf, t=0.0)
        AcceptanceQuery(level=-math.inf, t=0.5)
        with pytest.raises(ValueError, match="NaN"):
            AcceptanceQuery(level=math.nan, t=0.0)
        with pytest.raises(ValueError, match="nonnegative"):
            AcceptanceQuery(level=0.0, t=-0.1)
        with pytest.raises(ValueError, match="finite"):
            AcceptanceQuery(level=0.0, t=math.inf)

    def test_basic_membership(self):
        verdict = is_acceptable(estimate(-78.0, se=1.0), AcceptanceQuery(-70.0, 0.25))
        assert verdict.acceptable and not verdict.marginal
        assert bool(verdict)
        rejected = is_acceptable(estimate(-78.0, se=1.0), AcceptanceQuery(-80.0, 0.25))
        assert not rejected.acceptable and not bool(rejected)

    def test_marginal_band_is_two_standard_errors(self):
        q = AcceptanceQuery(level=3.0, t=0.0)
        assert is_acceptable(estimate(2.0, se=0.6), q).marginal
        assert not is_acceptable(estimate(2.0, se=0.5), q).marginal  # gap == 2·SE
        # the band is two-sided: a nearby rejection is marginal too
        assert is_acceptable(estimate(3.5, se=0.3), q).marginal is True
        assert is_acceptable(estimate(3.5, se=0.3), q).acceptable is False
        assert is_acceptable(estimate(3.5, se=0.2), q).marginal is False

    def test_level_equal_to_rate_accepts(self):
        q = AcceptanceQuery(level=2.0, t=0.0)
        assert is_acceptable(estimate(2.0, se=0.0), q).acceptable
        assert not is_acceptable(estimate(2.0, se=0.0), q).marginal
        assert is_acceptable(estimate(2.0, se=0.1), q).marginal

    def test_infinite_sentinels(self):
        v = is_acceptable(estimate(1e12, se=5.0), AcceptanceQuery(math.inf, 0.0))
        assert v.acceptable and not v.marginal
        v = is_acceptable(estimate(-1e12, se=5.0), AcceptanceQuery(-math.inf, 0.0))
        assert not v.acceptable and not v.marginal

    def test_undefined_rate_rejected_loudly(self):
        with pytest.raises(ValueError, match="NaN"):
            is_acceptable(
                RateEstimate(value=math.nan, std_error=1.0, method="closed_form"),
                AcceptanceQuery(0.0, 0.0),
            )
        with pytest.raises(ValueError, match="NaN"):
            min_acceptance_level(
                RateEstimate(value=math.nan, std_error=1.0, method="closed_form")
            )

    def test_min_level_round_trip(self):
        rate = estimate(-78.0, se=2.5)
        a_min = min_acceptance_level(rate)
        assert a_min == -78.0
        assert is_acceptable(rate, AcceptanceQuery(a_min, 0.25)).acceptable
        below = is_acceptable(rate, AcceptanceQuery(a_min - 3 * 2.5, 0.25))
        assert not below.acceptable and not below.marginal

    def test_zero_driver_accepts_exactly_the_nonnegative_levels(self):
        rate = rate_driver_expectation(zero_driver(), flat_solution(), 0.25)
        assert rate.value == 0.0 and rate.std_error == 0.0
        for a in (0.0, 0.5, 10.0):
            assert is_acceptable(rate, AcceptanceQuery(a, 0.25)).acceptable
        for a in (-1e-12, -0.5):
            assert not is_acceptable(rate, AcceptanceQuery(a, 0.25)).acceptable


# ------------------------------------------------------ family property report


class TestFamilyProperties:
    def test_zero_driver_family_passes_everywhere(self):
        report = acceptance_family_properties(
            zero_driver(), flat_solution(), 0.25, level_scale=5.0
        )
        assert len(report) == 6
        assert all(row.passed for row in report)
        assert {row.prop for row in report} == {
            "cash_insensitive",
            "positively_homogeneous",
        }
        assert sorted(row.level for row in report) == [-5.0, -5.0, 0.0, 0.0, 5.0, 5.0]

    def test_market_driver_family_passes(self):
        rng = np.random.default_rng(7)
        grid = make_time_grid(1.0, 8)
        rho = rng.normal(size=(64, grid.n_steps + 1))
        z = rng.normal(size=rho.shape)
        sol = SolutionSample(grid=grid, rho=rho, z=z)
        report = acceptance_family_properties(
            linear_brownian_driver(0.1, 0.2), sol, 0.5
        )
        assert all(row.passed for row in report)

    def test_y_dependent_driver_fails_cash_rows_only(self):
        sol = flat_solution(value=2.0)
        report = acceptance_family_properties(bond_driver(rate_fn=0.03), sol, 0.25)
        cash = [r for r in report if r.prop == "cash_insensitive"]
        homo = [r for r in report if r.prop == "positively_homogeneous"]
        assert all(not r.passed for r in cash)
        assert all("y" in r.detail for r in cash)
        assert all(r.passed for r in homo)

    def test_alpha_validation(self):
        with pytest.raises(ValueError, match="alpha"):
            acceptance_family_properties(
                zero_driver(), flat_solution(), 0.25, alpha=0.0
            )


# ------------------------------------------------------------- neutral driver


class TestNeutralDriver:
    def test_zero_curve_is_exact_identity(self):
        base = bond_driver(rate_fn=0.03)
        flat = RateCurve(times=[0.0, 0.5], values=[0.0, 0.0], horizon=1.0)
        neutral = resilience_neutral_driver(base, flat)
        y = np.array([-2.0, 0.5, 10.0])
        z = np.zeros(3)
        np.testing.assert_array_equal(neutral(0.3, y, z), base(0.3, y, z))

    def test_y_independent_base_reduces_to_additive_shift(self):
        base = linear_brownian_driver(0.1, 0.2)
        curve = RateCurve(times=[0.0, 0.5], values=[1.0, 3.0], horizon=1.0)
        neutral = resilience_neutral_driver(base, curve)
        y = np.array([4.0, -1.0])
        z = np.array([0.3, -0.7])
        np.testing.assert_allclose(
            neutral(0.25, y, z), base(0.25, y, z) + curve(0.25), rtol=1e-15
        )

    def test_y_dependent_base_sees_the_shifted_argument(self):
        r = 0.04
        base = bond_driver(rate_fn=r)
        curve = RateCurve(times=[0.0, 0.5], values=[2.0, 2.0], horizon=1.0)
        neutral = resilience_neutral_driver(base, curve)
        t, y = 0.25, np.array([1.0, -3.0])
        shift = 2.0 * (1.0 - t)  # ∫ₜᵀ of the constant curve
        expected = -r * (y - shift) + 2.0
        np.testing.assert_allclose(
            neutral(t, y, np.zeros(2)), expected, rtol=1e-14
        )

    def test_flags_survive_except_positive_homogeneity(self):
        base = bond_driver(from_state=True)
        curve = RateCurve(times=[0.0], values=[1.0], horizon=1.0)
        neutral = resilience_neutral_driver(base, curve)
        assert neutral.needs_state and base.positively_homogeneous
        assert not neutral.positively_homogeneous
        assert neutral.convex_in_y == base.convex_in_y
        assert neutral.jump_aware == base.jump_aware
        assert neutral.name == "neutral[bond]"

    def test_vasicek_neutralization_kills_the_rate(self):
        # correcting the evaluation by the remaining rate mass and the driver
        # by the matching drift leaves a statistically flat expectation
        sol = vasicek_solution(4000, seed=11)
        curve = exact_rate_curve(sol.grid)
        neutral = resilience_neutral_driver(bond_driver(from_state=True), curve)
        offsets = np.array(
            [curve.remaining_integral(t) for t in sol.grid.times]
        )
        adjusted = SolutionSample(
            grid=sol.grid, rho=sol.rho + offsets[None, :], z=sol.z, state=sol.state
        )
        for t in (0.25, 0.5, 0.75):
            est = rate_driver_expectation(neutral, adjusted, t)
            assert est.std_error > 0.0
            assert abs(est.value) <= 4.0 * est.std_error

    def test_second_neutralization_moves_at_most_by_measurement_noise(self):
        sol = vasicek_solution(4000, seed=3)
        curve = exact_rate_curve(sol.grid)
        neutral = resilience_neutral_driver(bond_driver(from_state=True), curve)
        offsets = np.array(
            [curve.remaining_integral(t) for t in sol.grid.times]
        )
        adjusted = SolutionSample(
            grid=sol.grid, rho=sol.rho + offsets[None, :], z=sol.z, state=sol.state
        )
        knots = sol.grid.times[:-1:8]
        second = [rate_driver_expectation(neutral, adjusted, t) for t in knots]
        worst_se = max(e.std_error for e in second)
        assert all(abs(e.value) <= 4.0 * e.std_error for e in second)
        curve2 = RateCurve(
            times=knots, values=[e.value for e in second], horizon=FIG2.horizon
        )
        twice = resilience_neutral_driver(neutral, curve2)
        t = 0.5
        y = adjusted.rho[:, sol.grid.index_of(t)]
        r_state = adjusted.state[:, sol.grid.index_of(t)]
        gap = np.abs(
            twice(t, y, None, state=r_state) - neutral(t, y, None, state=r_state)
        )
        # the second pass differs by r·∫|ρ̇₂| + |ρ̇₂(t)|, all of it measurement noise
        bound = 4.0 * worst_se * (1.0 + float(np.max(np.abs(r_state))) * FIG2.horizon)
        assert float(gap.max()) <= bound


# ------------------------------------------------------------- the adjustment


class TestAdjustment:
    def test_rra_zero_weight_vanishes(self):
        curve = RateCurve(times=[0.0, 0.5], values=[3.0, -1.0], horizon=1.0)
        assert rra(curve, 0.0, 0.25) == 0.0

    def test_rra_unit_weight_on_constant_curve(self):
        curve = RateCurve(times=[0.0, 0.25], values=[2.0, 2.0], horizon=1.0)
        for t in (0.0, 0.3, 0.9):
            assert rra(curve, 1.0, t) == pytest.approx(2.0 * (1.0 - t), rel=1e-14)

    def test_rra_callable_weight_linear_product_is_exact(self):
        # c(s) = s against a flat curve k: the product is piecewise linear, so
        # the trapezoid rule is exact: k(s₁² − t²)/2 up to the last knot s₁,
        # then the constant extension k·s₁ carries to the horizon
        k, s1, t = 1.5, 0.9, 0.2
        curve = RateCurve(
            times=np.linspace(0.0, s1, 10), values=np.full(10, k), horizon=1.0
        )
        want = k * (s1**2 - t**2) / 2.0 + k * s1 * (1.0 - s1)
        assert rra(curve, lambda s: s, t) == pytest.approx(want, rel=1e-12)

    def test_rra_additive_over_subintervals(self):
        curve = RateCurve(times=[0.0, 0.4, 0.8], values=[1.0, 2.0, 0.5], horizon=1.0)
        c = np.array([1.0, 0.5, 0.25])
        t, u = 0.1, 0.55
        middle_knots = np.array([t, 0.4, u])
        # the weighted rate is formed on the knots and then interpolated
        product = np.interp(middle_knots, curve.times, curve.values * c)
        middle = np.trapezoid(product, middle_knots)
        assert rra(curve, c, t) == pytest.approx(
            middle + rra(curve, c, u), rel=1e-12
        )

    def test_rra_one_sided_weight_keeps_the_sign(self):
        curve = RateCurve(times=[0.0, 0.5], values=[0.3, 1.2], horizon=1.0)
        for t in (0.0, 0.4, 0.99):
            assert rra(curve, lambda s: np.abs(np.sin(9 * s)), t) >= 0.0

    def test_rra_weight_validation(self):
        curve = RateCurve(times=[0.0, 0.5], values=[1.0, 1.0], horizon=1.0)
        with pytest.raises(ValueError, match="align"):
            rra(curve, np.array([1.0, 2.0, 3.0]), 0.0)
        with pytest.raises(ValueError, match="finite"):
            rra(curve, math.nan, 0.0)
        with pytest.raises(ValueError, match="outside"):
            rra(curve, 1.0, 2.0)

    def test_adjusted_paths_add_the_remaining_adjustment_exactly(self):
        grid = make_time_grid(1.0, 4)
        rho = np.arange(12.0).reshape(3, -1) if grid.n_steps == 3 else None
        rho = np.arange(3 * (grid.n_steps + 1), dtype=float).reshape(3, -1)
        curve = RateCurve(times=[0.0, 0.5], values=[1.0, 1.0], horizon=1.0)
        out = adjusted_risk_paths(rho, grid, curve, 1.0)
        for k, t in enumerate(grid.times):
            np.testing.assert_allclose(
                out[:, k], rho[:, k] + (1.0 - t), rtol=1e-14
            )

    def test_adjusted_paths_shape_validation(self):
        grid = make_time_grid(1.0, 4)
        curve = RateCurve(times=[0.0], values=[1.0], horizon=1.0)
        with pytest.raises(ValueError, match="shape"):
            adjusted_risk_paths(np.zeros((3, 7)), grid, curve, 1.0)


class TestExpansionCheck:
    @staticmethod
    def quadratic_paths(m, q, n_paths=32, n_steps=16, seed=0):
        grid = make_time_grid(1.0, n_steps)
        rng = np.random.default_rng(seed)
        base = rng.normal(size=n_paths)
        t = grid.times[None, :]
        rho = base[:, None] + m * t + q * t**2
        return rho, grid

    @staticmethod
    def slope_curve(grid, m, q):
        times = grid.times[:-1]
        return RateCurve(times=times, values=m + 2 * q * times, horizon=grid.horizon)

    def test_full_adjustment_freezes_the_mean(self):
        rho, grid = self.quadratic_paths(m=-2.0, q=0.0)
        curve = self.slope_curve(grid, -2.0, 0.0)
        chk = adjusted_risk_expansion_check(rho, grid, curve, 1.0, s=0.25)
        assert chk.target == 0.0
        assert abs(chk.estimate.value) < 1e-10
        assert chk.passed

    def test_no_adjustment_recovers_the_raw_slope(self):
        rho, grid = self.quadratic_paths(m=-2.0, q=0.75)
        curve = self.slope_curve(grid, -2.0, 0.75)
        s = 0.25
        chk = adjusted_risk_expansion_check(rho, grid, curve, 0.0, s=s)
        assert chk.target == pytest.approx(-2.0 + 2 * 0.75 * s, rel=1e-12)
        # per-path quotients are linear in the offset, so the extrapolated
        # intercept equals the true derivative
        assert chk.estimate.value == pytest.approx(chk.target, rel=1e-9)

    def test_half_adjustment_halves_the_drift(self):
        m, q, s = 1.0, 0.5, 0.25
        rho, grid = self.quadratic_paths(m=m, q=q)
        curve = self.slope_curve(grid, m, q)
        chk = adjusted_risk_expansion_check(rho, grid, curve, 0.5, s=s)
        want = 0.5 * (m + 2 * q * s)
        assert chk.target == pytest.approx(want, rel=1e-12)
        assert chk.estimate.value == pytest.approx(want, rel=1e-6)

    def test_custom_offsets_are_passed_through(self):
        rho, grid = self.quadratic_paths(m=1.0, q=0.0)
        curve = self.slope_curve(grid, 1.0, 0.0)
        offsets = (0.25, 0.125)
        chk = adjusted_risk_expansion_check(
            rho, grid, curve, 0.0, s=0.25, t_offsets=offsets
        )
        assert chk.estimate.epsilons == offsets

    @pytest.mark.parametrize("c", [0.0, 0.5, 1.0])
    def test_vasicek_expansion_within_band(self, c):
        sol = vasicek_solution(4000, seed=29)
        curve = exact_rate_curve(sol.grid)
        chk = adjusted_risk_expansion_check(
            sol.rho, sol.grid, curve, c, s=0.25
        )
        assert chk.passed, (
            f"c={c}: estimate {chk.estimate.value:.3e} vs target "
            f"{chk.target:.3e} band {chk.band:.3e}"
        )
