"""Structural invariants of the rate estimators, runnable as one suite.

Each check builds a small scenario with a known answer and verifies one
property the estimators must satisfy: invariance under cash shifts, scaling,
time consistency, orderings, concavity, stability, martingale neutrality,
agreement of the two independent estimators, and the acceptance-set round
trip. Exact claims are asserted with common random numbers (the comparison
is algebra, not statistics); statistical claims use 4-standard-error bands.

``run_property_suite`` executes everything and returns one result per
property; the command-line ``properties`` subcommand prints that table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .bsde_engine import (
    Driver,
    SolutionSample,
    linear_brownian_driver,
    lsmc_solve,
    rate_driver_expectation,
    rate_finite_difference,
    zero_driver,
)
from .resilience_toolkit import AcceptanceQuery, is_acceptable, min_acceptance_level
from .risk_closed_forms import (
    BSPutSpec,
    VasicekBondSpec,
    bs_put_price,
    vasicek_bond_price,
)
from .stochastic_core import (
    first_hitting,
    make_time_grid,
    sample_noise,
    simulate_gbm,
    simulate_vasicek,
)

__all__ = [
    "PropertyResult",
    "check_acceptance_round_trip",
    "check_cash_insensitivity",
    "check_comparison",
    "check_concavity",
    "check_dual_estimators",
    "check_l2_stability",
    "check_martingale_neutrality",
    "check_positive_homogeneity",
    "check_supermartingale_sign",
    "check_time_consistency",
    "run_property_suite",
]

_PUT = BSPutSpec(s0=1000.0, strike=1000.0, mu=0.10, sigma=0.10, horizon=1.0)
_BOND = VasicekBondSpec(r0=0.02, a=1.0, b=0.02, sigma=0.01, horizon=1.0)


@dataclass(frozen=True)
class PropertyResult:
    """Outcome of one structural check."""

    name: str
    passed: bool
    detail: str


def _put_solution(n_paths: int, seed: int, n_steps: int = 64) -> SolutionSample:
    """Exact put-value paths with their volatility loading on simulated spots."""
    grid = make_time_grid(_PUT.horizon, n_steps)
    noise = sample_noise(grid, n_paths, seed=seed)
    states = simulate_gbm(grid, _PUT.s0, _PUT.mu, _PUT.sigma, noise)
    s = states.values
    rho = np.empty_like(s)
    z = np.empty_like(s)
    for k, t in enumerate(grid.times):
        rho[:, k] = bs_put_price(_PUT, t, s[:, k])
        if t < grid.horizon:
            z[:, k] = -_PUT.sigma * s[:, k] * ndtr(-_PUT.d_plus(t, s[:, k]))
        else:
            z[:, k] = 0.0
    return SolutionSample(grid=grid, rho=rho, z=z, state=s)


def _bond_solution(n_paths: int, seed: int, n_steps: int = 64):
    """Exact bond-price paths on simulated short rates."""
    grid = make_time_grid(_BOND.horizon, n_steps)
    noise = sample_noise(grid, n_paths, seed=seed)
    states = simulate_vasicek(grid, _BOND.r0, _BOND.a, _BOND.b, _BOND.sigma, noise)
    rho = np.column_stack(
        [
            vasicek_bond_price(_BOND, t, states.values[:, k])
            for k, t in enumerate(grid.times)
        ]
    )
    sol = SolutionSample(
        grid=grid, rho=rho, z=np.zeros_like(rho), state=states.values
    )
    return sol, states


def _growth_driver(kappa: float) -> Driver:
    """g(y) = κ·y: exponential growth of the evaluation toward maturity."""
    return Driver(
        name="linear_growth",
        evaluate=lambda t, y, z, u: kappa * np.asarray(y, dtype=float),
        positively_homogeneous=True,
        convex_in_y=True,
        nondecreasing_in_y=True,
    )


def _conditional_mean_paths(n_paths: int, seed: int, n_steps: int = 16):
    """m_k = E[S_T | S_{t_k}] along simulated exponential-model paths."""
    grid = make_time_grid(1.0, n_steps)
    noise = sample_noise(grid, n_paths, seed=seed)
    states = simulate_gbm(grid, 1.0, 0.05, 0.2, noise)
    m = states.values * np.exp(0.05 * (grid.horizon - grid.times))[None, :]
    return grid, m


def check_cash_insensitivity(n_paths: int = 4000, seed: int = 0) -> PropertyResult:
    """A constant added to the claim leaves the rate untouched, exactly.

    For a y-independent driver the (Z, U) samples of the shifted claim are
    the very same arrays, so the driver-expectation estimate cannot move.
    """
    sol = _put_solution(n_paths, seed)
    driver = linear_brownian_driver(_PUT.mu, _PUT.sigma)
    base = rate_driver_expectation(driver, sol, 0.25)
    shifted = SolutionSample(grid=sol.grid, rho=sol.rho + 50.0, z=sol.z, state=sol.state)
    after = rate_driver_expectation(driver, shifted, 0.25)
    passed = after.value == base.value and after.std_error == base.std_error
    return PropertyResult(
        "cash_insensitivity",
        passed,
        f"rate {base.value:.4f} -> {after.value:.4f} after a +50 cash shift",
    )


def check_positive_homogeneity(n_paths: int = 4000, seed: int = 0) -> PropertyResult:
    """Scaling the claim by α scales the rate by α, exactly.

    α ∈ {0, 1/2, 2} are binary powers, so the scaled driver values are
    bit-identical multiples and the sample means compare with == .
    """
    sol = _put_solution(n_paths, seed)
    driver = linear_brownian_driver(_PUT.mu, _PUT.sigma)
    base = rate_driver_expectation(driver, sol, 0.25)
    gaps = []
    for alpha in (0.0, 0.5, 2.0):
        scaled = SolutionSample(
            grid=sol.grid, rho=alpha * sol.rho, z=alpha * sol.z, state=sol.state
        )
        est = rate_driver_expectation(driver, scaled, 0.25)
        gaps.append(est.value - alpha * base.value)
    passed = all(g == 0.0 for g in gaps)
    return PropertyResult(
        "positive_homogeneity",
        passed,
        f"rate(alpha*X) - alpha*rate(X) = {gaps} for alpha in (0, 0.5, 2)",
    )


def check_time_consistency(n_paths: int = 4000, seed: int = 0) -> PropertyResult:
    """Re-evaluating the claim ρ_s(X) at s instead of X at T keeps the rate.

    With g(y) = κy the evaluation is e^{κ(T−t)}·E_t[X], so the risk paths of
    the restated problem coincide with the original on [0, s] and the rates
    match to floating-point accuracy.
    """
    kappa = 0.3
    grid, m = _conditional_mean_paths(n_paths, seed)
    driver = _growth_driver(kappa)
    rho_full = np.exp(kappa * (grid.horizon - grid.times))[None, :] * m

    s = 0.5
    k_s = grid.index_of(s)
    grid_s = make_time_grid(s, k_s)
    # terminal claim ρ_s(X), re-evaluated on the shorter horizon
    rho_restated = (
        np.exp(kappa * (s - grid_s.times))[None, :]
        * np.exp(kappa * (grid.horizon - s))
        * m[:, : k_s + 1]
    )
    full = SolutionSample(grid=grid, rho=rho_full, z=np.zeros_like(rho_full))
    restated = SolutionSample(
        grid=grid_s, rho=rho_restated, z=np.zeros_like(rho_restated)
    )
    worst = 0.0
    for t in (0.0, 0.25):
        a = rate_driver_expectation(driver, full, t)
        b = rate_driver_expectation(driver, restated, t)
        worst = max(worst, abs(a.value - b.value) / abs(a.value))
    return PropertyResult(
        "time_consistency",
        worst < 1e-12,
        f"worst relative rate gap {worst:.2e} between horizons T and s={s}",
    )


def check_comparison(n_paths: int = 4000, seed: int = 0) -> PropertyResult:
    """A pathwise-larger claim has a pathwise-smaller rate, at every grid time.

    With g(y) = κy the rate is −κ·e^{κ(T−t)}·E[X]: the estimator must land on
    that sample mean to round-off, and the ordering must hold with no band.
    """
    kappa = 0.3
    shift = 0.4
    grid, m = _conditional_mean_paths(n_paths, seed)
    driver = _growth_driver(kappa)
    discount = np.exp(kappa * (grid.horizon - grid.times))[None, :]
    big = SolutionSample(grid=grid, rho=discount * (m + shift), z=np.zeros_like(m))
    small = SolutionSample(grid=grid, rho=discount * m, z=np.zeros_like(m))
    ordered = True
    worst_rel = 0.0
    for k, t in enumerate(grid.times[:-1]):
        r_big = rate_driver_expectation(driver, big, t)
        r_small = rate_driver_expectation(driver, small, t)
        ordered &= r_big.value <= r_small.value
        hand = -kappa * math.exp(kappa * (grid.horizon - t)) * float(
            np.mean(m[:, k] + shift)
        )
        worst_rel = max(worst_rel, abs(r_big.value - hand) / abs(hand))
    return PropertyResult(
        "comparison",
        ordered and worst_rel < 1e-12,
        f"ordering holds at every grid time; closed-form gap {worst_rel:.2e}",
    )


def check_concavity(n_paths: int = 2000, seed: int = 0) -> PropertyResult:
    """Mixing claims cannot decrease the rate below the mixed rates (4·SE).

    g(y) = y⁺ on nonnegative claims: each mixture is solved independently by
    the backward regression solver, so the inequality is not a tautology.
    """
    driver = Driver(
        name="positive_part",
        evaluate=lambda t, y, z, u: np.maximum(np.asarray(y, dtype=float), 0.0),
        positively_homogeneous=True,
        convex_in_y=True,
        nondecreasing_in_y=True,
    )
    grid = make_time_grid(1.0, 32)
    noise = sample_noise(grid, n_paths, seed=seed)
    states = simulate_gbm(grid, 1.0, 0.05, 0.2, noise)
    x1 = states.values[:, -1]
    x2 = np.maximum(1.2 - states.values[:, -1], 0.0)

    def rate_of(payoff):
        sol = lsmc_solve(driver, payoff, states, noise)
        return rate_driver_expectation(driver, sol, 0.25)

    r1, r2 = rate_of(x1), rate_of(x2)
    worst_margin = -math.inf
    for lam in (0.25, 0.5, 0.75):
        r_mix = rate_of(lam * x1 + (1.0 - lam) * x2)
        lhs = lam * r1.value + (1.0 - lam) * r2.value
        se = math.sqrt(
            (lam * r1.std_error) ** 2
            + ((1.0 - lam) * r2.std_error) ** 2
            + r_mix.std_error**2
        )
        worst_margin = max(worst_margin, lhs - r_mix.value - 4.0 * se)
    return PropertyResult(
        "concavity",
        worst_margin <= 0.0,
        f"worst violation margin {worst_margin:.3e} (negative means slack)",
    )


def check_l2_stability(n_paths: int = 4000, seed: int = 0) -> PropertyResult:
    """Rate curves converge in grid-L² as driver and claim converge.

    gₙ = −(μₙ/σ)z with μₙ → μ and claims cₙ·S_T → S_T: the exact solution is
    cₙ·S_t·e^{(μ−μₙ)(T−t)}, and on a common path sample the distance to the
    limiting rate curve must shrink at every step of a 4-term sequence.
    """
    mu, sigma = 0.1, 0.2
    grid = make_time_grid(1.0, 32)
    noise = sample_noise(grid, n_paths, seed=seed)
    s = simulate_gbm(grid, 1.0, mu, sigma, noise).values
    times = grid.times[:-1]

    def rate_curve(mu_n: float, c_n: float) -> np.ndarray:
        theta = mu_n / sigma
        decay = np.exp((mu - mu_n) * (grid.horizon - times))[None, :]
        z = sigma * c_n * s[:, : times.size] * decay
        return theta * np.mean(z, axis=0)

    limit = rate_curve(mu, 1.0)
    dist = [
        float(
            np.sqrt(
                grid.dt
                * np.sum((rate_curve(mu * (1 - 0.5**n), 1 + 0.5**n) - limit) ** 2)
            )
        )
        for n in range(1, 5)
    ]
    passed = all(a > b for a, b in zip(dist, dist[1:]))
    return PropertyResult(
        "l2_stability",
        passed,
        "grid-L2 distances " + ", ".join(f"{d:.4f}" for d in dist),
    )


def check_martingale_neutrality(n_paths: int = 4000, seed: int = 0) -> PropertyResult:
    """The zero driver yields a rate of exactly 0 at grid and hitting times."""
    sol = _put_solution(n_paths, seed)
    driver = zero_driver()
    values = [rate_driver_expectation(driver, sol, t).value for t in (0.0, 0.25, 0.75)]
    tau = first_hitting(sol.rho, 50.0, ">=", grid=sol.grid)
    values.append(rate_driver_expectation(driver, sol, tau).value)
    passed = all(v == 0.0 for v in values) and tau.hit_fraction > 0.0
    return PropertyResult(
        "martingale_neutrality",
        passed,
        f"rates {values} at three grid times and a hitting time "
        f"(hit fraction {tau.hit_fraction:.2f})",
    )


def check_supermartingale_sign(n_paths: int = 4000, seed: int = 0) -> PropertyResult:
    """A decreasing mean evaluation must show a nonpositive rate (4·SE)."""
    sol = _put_solution(n_paths, seed)
    est = rate_finite_difference(sol, at=0.25)
    passed = est.value <= 4.0 * est.std_error
    return PropertyResult(
        "supermartingale_sign",
        passed,
        f"finite-difference rate {est.value:.2f} ± {est.std_error:.2f}",
    )


def check_dual_estimators(n_paths: int = 4000, seed: int = 0) -> PropertyResult:
    """Finite differences and the driver expectation agree within 4 joint SE,
    at a deterministic time and at a first-hitting time, on both built-in
    closed-form scenarios."""
    from .bsde_engine import bond_driver  # local import keeps the header lean

    gaps = []

    def gap(driver, sol, at) -> float:
        fd = rate_finite_difference(sol, at=at)
        dx = rate_driver_expectation(driver, sol, at)
        se = math.hypot(fd.std_error, dx.std_error)
        gaps.append(abs(fd.value - dx.value) / (4.0 * se))
        return gaps[-1]

    put = _put_solution(n_paths, seed)
    put_driver = linear_brownian_driver(_PUT.mu, _PUT.sigma)
    gap(put_driver, put, 0.25)
    gap(put_driver, put, first_hitting(put.rho, 80.0, ">=", grid=put.grid))

    bond, states = _bond_solution(n_paths, seed)
    gap(bond_driver(from_state=True), bond, 0.25)
    gap(bond_driver(from_state=True), bond, first_hitting(states, 0.025, ">="))

    passed = all(g <= 1.0 for g in gaps)
    return PropertyResult(
        "dual_estimator_agreement",
        passed,
        "gap / (4 SE) = " + ", ".join(f"{g:.2f}" for g in gaps),
    )


def check_acceptance_round_trip(n_paths: int = 4000, seed: int = 0) -> PropertyResult:
    """The minimal acceptance level accepts; three SE below it rejects."""
    sol = _put_solution(n_paths, seed)
    est = rate_driver_expectation(
        linear_brownian_driver(_PUT.mu, _PUT.sigma), sol, 0.25
    )
    a_min = min_acceptance_level(est)
    at_min = is_acceptable(est, AcceptanceQuery(a_min, 0.25))
    below = is_acceptable(est, AcceptanceQuery(a_min - 3.0 * est.std_error, 0.25))
    exact_zero = rate_driver_expectation(zero_driver(), sol, 0.25)
    zero_ok = (
        is_acceptable(exact_zero, AcceptanceQuery(0.0, 0.25)).acceptable
        and not is_acceptable(exact_zero, AcceptanceQuery(-1e-9, 0.25)).acceptable
    )
    passed = at_min.acceptable and not below.acceptable and zero_ok
    return PropertyResult(
        "acceptance_round_trip",
        passed,
        f"min level {a_min:.2f} accepts; {a_min - 3 * est.std_error:.2f} rejects",
    )


_CHECKS = (
    check_cash_insensitivity,
    check_positive_homogeneity,
    check_time_consistency,
    check_comparison,
    check_concavity,
    check_l2_stability,
    check_martingale_neutrality,
    check_supermartingale_sign,
    check_dual_estimators,
    check_acceptance_round_trip,
)


def run_property_suite(n_paths: int = 4000, seed: int = 0) -> list[PropertyResult]:
    """Run every structural check and return one result per property."""
    return [check(n_paths=n_paths, seed=seed) for check in _CHECKS]
