"""Drivers, resilience-rate estimators, and a least-squares backward solver.

The rate of a risk evaluation is estimated two independent ways:

* finite differences of the simulated risk trajectory, extrapolated in the
  lookahead ε (:func:`rate_finite_difference`), and
* the expected-generator route: minus the sample mean of the driver along the
  solution (:func:`rate_driver_expectation`).

Agreement of the two on common random numbers is the engine's core
self-check. At a first-hitting time the generator route reads the (z, u)
components at the first grid instant strictly after the hit when the model
carries jumps (they are left-continuous there, so the right limit lives one
step ahead), while purely Brownian solutions read everything at the hit.

Numeric caveat: the estimators assume the evaluated rate exists and is finite
at the requested instant (piecewise regularity of the underlying risk
trajectory); the built-in scenarios satisfy this by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.random import Generator, Philox, SeedSequence
from scipy.special import ndtr
from scipy.stats import poisson

from .risk_closed_forms import PiecewiseConstant
from .stochastic_core import NoiseBundle, StatePaths, StoppingSample, TimeGrid

__all__ = [
    "Driver",
    "SolutionSample",
    "RateEstimate",
    "JumpCallSpec",
    "builtin_drivers",
    "zero_driver",
    "linear_brownian_driver",
    "bond_driver",
    "ambiguous_driver",
    "entropic_brownian_driver",
    "entropic_jump_driver",
    "jump_market_linear_driver",
    "probe_driver_flags",
    "rate_driver_expectation",
    "rate_finite_difference",
    "rate_conditional",
    "lsmc_solve",
    "entropic_rate_brownian",
    "entropic_z_regression",
    "entropic_rate_jump",
    "jump_market_rate",
    "jump_market_rate_series",
    "ambiguous_rate_value_and_rate",
]


# ------------------------------------------------------------------ drivers


@dataclass(frozen=True)
class Driver:
    """A generator g(t, y, z, u) with capability flags.

    ``evaluate`` must be vectorized: t is a scalar or per-path array, y/z/u
    are per-path arrays (u may be None for continuous solutions, and state is
    passed only when ``needs_state``). Flags assert structural properties the
    estimators and the property suite rely on; set a flag only if it holds
    (False makes no claim either way). ``regularity`` is "lipschitz" or
    "quadratic"; ``jump_aware`` marks drivers meant for solutions with a jump
    component, which switches the stopping-time read to the right limit.
    """

    name: str
    evaluate: Callable
    y_independent: bool = False
    positively_homogeneous: bool = False
    convex_in_y: bool = False
    nondecreasing_in_y: bool = False
    regularity: str = "lipschitz"
    jump_aware: bool = False
    needs_state: bool = False
    probe_domain_positive: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        if self.regularity not in ("lipschitz", "quadratic"):
            raise ValueError(f"unknown regularity {self.regularity!r}")

    def __call__(self, t, y, z, u=None, state=None):
        if self.needs_state:
            if state is None:
                raise ValueError(f"driver {self.name!r} needs the state channel")
            return self.evaluate(t, y, z, u, state)
        return self.evaluate(t, y, z, u)


def _znorm2(z):
    """‖z‖² per path for z of shape (n,) or (n, d)."""
    z = np.asarray(z, dtype=float)
    return z**2 if z.ndim == 1 else np.sum(z**2, axis=-1)


def zero_driver() -> Driver:
    return Driver(
        name="zero",
        evaluate=lambda t, y, z, u: np.zeros(np.shape(y)),
        y_independent=True,
        positively_homogeneous=True,
        convex_in_y=True,
        nondecreasing_in_y=True,
    )


def linear_brownian_driver(mu: float, sigma: float) -> Driver:
    """g = −(mu/sigma)·z: prices under the drift-removing measure change."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    theta = mu / sigma
    return Driver(
        name="linear_brownian",
        evaluate=lambda t, y, z, u: -theta * np.asarray(z, dtype=float),
        y_independent=True,
        positively_homogeneous=True,
        convex_in_y=True,
        nondecreasing_in_y=True,
    )


def bond_driver(rate_fn=None, from_state: bool = False) -> Driver:
    """g = −r·y: discounting at a rate read from time (``rate_fn``) or state.

    ``rate_fn`` may be a constant or a vectorized callable of t. With
    ``from_state`` the per-path state array is used as the rate instead
    (short-rate models).
    """
    if from_state:
        return Driver(
            name="bond",
            evaluate=lambda t, y, z, u, state: -np.asarray(state, dtype=float)
            * np.asarray(y, dtype=float),
            positively_homogeneous=True,
            convex_in_y=True,
            needs_state=True,
            probe_domain_positive=True,
        )
    if rate_fn is None:
        raise ValueError("supply rate_fn or set from_state")
    r = rate_fn if callable(rate_fn) else (lambda t, _r=float(rate_fn): _r)
    return Driver(
        name="bond",
        evaluate=lambda t, y, z, u: -np.asarray(r(t), dtype=float)
        * np.asarray(y, dtype=float),
        positively_homogeneous=True,
        convex_in_y=True,
    )


def ambiguous_driver(r_fn, big_r_fn) -> Driver:
    """g = −(r·y⁺ − R·y⁻): borrow at R, lend at r, with 0 ≤ r ≤ R.

    Piecewise-linear in y with slope −R below zero and −r above, hence convex.
    """
    r = r_fn if callable(r_fn) else (lambda t, _v=float(r_fn): _v)
    R = big_r_fn if callable(big_r_fn) else (lambda t, _v=float(big_r_fn): _v)

    def evaluate(t, y, z, u):
        y = np.asarray(y, dtype=float)
        return -(
            np.asarray(r(t), dtype=float) * np.maximum(y, 0.0)
            - np.asarray(R(t), dtype=float) * np.maximum(-y, 0.0)
        )

    return Driver(
        name="ambiguous",
        evaluate=evaluate,
        positively_homogeneous=True,
        convex_in_y=True,
    )


def entropic_brownian_driver(gamma: float) -> Driver:
    """g = (gamma/2)·‖z‖², the quadratic generator of the entropic measure."""
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return Driver(
        name="entropic_brownian",
        evaluate=lambda t, y, z, u: 0.5 * gamma * _znorm2(z),
        y_independent=True,
        convex_in_y=True,
        nondecreasing_in_y=True,
        regularity="quadratic",
    )


def entropic_jump_driver(gamma: float, jump_rate: float) -> Driver:
    """Entropic generator with a finite-activity jump term.

    g = (gamma/2)‖z‖² + (rate/gamma)·(e^{gamma·u} − gamma·u − 1), with u the
    scalar jump increment of the risk evaluation (mark-independent impact).
    """
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if jump_rate < 0.0:
        raise ValueError(f"jump_rate must be >= 0, got {jump_rate}")

    def evaluate(t, y, z, u):
        if u is None:
            raise ValueError("entropic jump driver needs the u component")
        gu = gamma * np.asarray(u, dtype=float)
        return 0.5 * gamma * _znorm2(z) + (jump_rate / gamma) * (
            np.expm1(gu) - gu
        )

    return Driver(
        name="entropic_jump",
        evaluate=evaluate,
        y_independent=True,
        convex_in_y=True,
        nondecreasing_in_y=True,
        regularity="quadratic",
        jump_aware=True,
    )


def jump_market_linear_driver(mu: float, sigma: float) -> Driver:
    """g = −(mu/sigma)·z on a jump-diffusion solution (right-limit reads)."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    theta = mu / sigma
    return Driver(
        name="jump_market_linear",
        evaluate=lambda t, y, z, u: -theta * np.asarray(z, dtype=float),
        y_independent=True,
        positively_homogeneous=True,
        convex_in_y=True,
        nondecreasing_in_y=True,
        jump_aware=True,
    )


def builtin_drivers() -> dict[str, Callable[..., Driver]]:
    """Catalog of driver factories keyed by name; call one to instantiate."""
    return {
        "zero": zero_driver,
        "linear_brownian": linear_brownian_driver,
        "bond": bond_driver,
        "ambiguous": ambiguous_driver,
        "entropic_brownian": entropic_brownian_driver,
        "entropic_jump": entropic_jump_driver,
        "jump_market_linear": jump_market_linear_driver,
    }


def probe_driver_flags(driver: Driver, seed: int = 0, n_probes: int = 64) -> None:
    """Check every True flag against randomized evaluations.

    Raises:
        ValueError: listing each flag whose claimed property fails on probes.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0)
    if driver.probe_domain_positive:
        y = rng.lognormal(0.0, 0.5, size=n_probes)
    else:
        y = rng.normal(0.0, 1.0, size=n_probes)
    z = rng.normal(0.0, 1.0, size=n_probes)
    u = rng.normal(0.0, 0.5, size=n_probes)
    state = rng.lognormal(0.0, 0.3, size=n_probes) * 0.05

    def g(yy, zz=z, uu=u, tt=t):
        return np.asarray(driver(tt, yy, zz, uu, state=state), dtype=float)

    base = g(y)
    scale = max(1.0, float(np.max(np.abs(base))))
    problems = []
    if driver.y_independent:
        if not np.allclose(g(y + 1.7), base, atol=1e-10 * scale):
            problems.append("y_independent")
    if driver.positively_homogeneous:
        for alpha in (0.5, 2.0):
            got = np.asarray(
                driver(t, alpha * y, alpha * z, alpha * u, state=state), dtype=float
            )
            if not np.allclose(got, alpha * base, atol=1e-10 * scale):
                problems.append(f"positively_homogeneous (alpha={alpha})")
                break
    if driver.convex_in_y:
        y2 = y[::-1].copy()
        mid = g(0.5 * (y + y2))
        if np.any(mid > 0.5 * (g(y) + g(y2)) + 1e-10 * scale):
            problems.append("convex_in_y")
    if driver.nondecreasing_in_y:
        if np.any(g(y + abs(rng.normal(0.0, 1.0))) < base - 1e-10 * scale):
            problems.append("nondecreasing_in_y")
    if problems:
        raise ValueError(
            f"driver {driver.name!r} flags inconsistent with evaluate: "
            + ", ".join(problems)
        )


# ------------------------------------------------------------ sample types


@dataclass(frozen=True)
class SolutionSample:
    """Sampled solution of a backward equation on the full grid.

    ``rho`` (the risk evaluation) and ``z`` have shape (n_paths, n_steps+1);
    ``rho[:, -1]`` is the terminal payoff exactly. ``u_surrogate`` holds the
    scalar jump increment of rho where the model jumps (None otherwise), and
    ``state`` the underlying Markov state for drivers that need it.
    """

    grid: TimeGrid
    rho: np.ndarray
    z: np.ndarray
    u_surrogate: np.ndarray | None = None
    state: np.ndarray | None = None

    def __post_init__(self) -> None:
        expect = (self.rho.shape[0], self.grid.n_steps + 1)
        for label, arr in (
            ("rho", self.rho),
            ("z", self.z),
            ("u_surrogate", self.u_surrogate),
            ("state", self.state),
        ):
            if arr is not None and arr.shape != expect:
                raise ValueError(f"{label} must have shape {expect}, got {arr.shape}")

    @property
    def n_paths(self) -> int:
        return self.rho.shape[0]


_METHODS = ("finite_difference", "driver_expectation", "closed_form")


@dataclass(frozen=True)
class RateEstimate:
    """A resilience-rate estimate with its uncertainty and provenance."""

    value: float
    std_error: float
    method: str
    epsilons: tuple[float, ...] | None = None
    extrapolation_diag: tuple[float, float] | None = None  # (slope, intercept)

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if not self.std_error >= 0.0:
            raise ValueError(f"std_error must be >= 0, got {self.std_error}")
        if self.method == "finite_difference":
            if not self.epsilons or any(
                b >= a for a, b in zip(self.epsilons, self.epsilons[1:])
            ):
                raise ValueError("finite_difference needs strictly decreasing epsilons")


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), se


# ---------------------------------------------------- generator-route rates


def _component(arr: np.ndarray | None, rows: np.ndarray, cols: np.ndarray):
    return None if arr is None else arr[rows, cols]


def _stopping_reads(
    driver: Driver, solution: SolutionSample, stopping: StoppingSample
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None, np.ndarray | None]:
    """(t, y, z, u, state) on hit paths under the stopping-time conventions."""
    if stopping.grid != solution.grid:
        raise ValueError("stopping sample and solution live on different grids")
    hit = stopping.hit
    if not hit.any():
        raise ValueError(
            "conditional event has empirical probability 0 (no path ever hits)"
        )
    rows = np.flatnonzero(hit)
    k_hit = stopping.hit_index[rows]
    # rho is right-continuous: read it at the hit. The (z, u) components are
    # left-continuous with right limits, so on jump-carrying solutions their
    # limit from the right lives at the next grid instant; purely Brownian
    # solutions are continuous and everything is read at the hit itself.
    k_zu = k_hit + 1 if driver.jump_aware else k_hit
    t = stopping.tau[rows]
    y = solution.rho[rows, k_hit]
    z = solution.z[rows, k_zu]
    u = _component(solution.u_surrogate, rows, k_zu)
    state = _component(solution.state, rows, k_zu if driver.jump_aware else k_hit)
    return t, y, z, u, state


def rate_driver_expectation(
    driver: Driver, solution: SolutionSample, at: float | StoppingSample
) -> RateEstimate:
    """Rate as −E[g(t, ρ, Z, U)] at a grid time or first-hitting time.

    At a stopping time the mean runs over hit paths only (the event {τ < T}
    has to carry positive empirical mass, otherwise a ValueError is raised).
    """
    if isinstance(at, StoppingSample):
        t, y, z, u, state = _stopping_reads(driver, solution, at)
    else:
        k = solution.grid.index_of(float(at))
        t = float(at)
        y = solution.rho[:, k]
        z = solution.z[:, k]
        u = None if solution.u_surrogate is None else solution.u_surrogate[:, k]
        state = None if solution.state is None else solution.state[:, k]
    g = np.asarray(driver(t, y, z, u, state=state), dtype=float)
    value, se = _mean_se(-g)
    return RateEstimate(value=value, std_error=se, method="driver_expectation")


def rate_conditional(
    driver: Driver,
    solution: SolutionSample,
    tau: StoppingSample,
    sigma: float | StoppingSample,
    conditioning_state: np.ndarray,
    degree: int = 4,
) -> tuple[np.ndarray, RateEstimate]:
    """Conditional rate at τ given the information at an earlier instant σ.

    Regresses 1_{τ<T}·(−g at the stopping-time reads)/P̂(τ<T) on a polynomial
    basis of ``conditioning_state`` (the caller's per-path F_σ features) and
    returns the fitted per-path values plus their mean as the aggregate
    estimate. The fit preserves the sample mean, so the aggregate reproduces
    :func:`rate_driver_expectation` at τ exactly. A degenerate (constant)
    state falls back to the unconditional value on every path.
    """
    if isinstance(sigma, StoppingSample):
        if np.any(sigma.tau > tau.tau + 1e-12):
            raise ValueError("sigma must not exceed tau on any path")
    else:
        if np.any(float(sigma) > tau.tau + 1e-12):
            raise ValueError("sigma must not exceed tau on any path")
    conditioning_state = np.asarray(conditioning_state, dtype=float)
    if conditioning_state.shape != (solution.n_paths,):
        raise ValueError("conditioning_state must be one feature per path")

    t, y, z, u, state = _stopping_reads(driver, solution, tau)
    g = np.asarray(driver(t, y, z, u, state=state), dtype=float)
    p_hat = tau.hit_fraction
    targets = np.zeros(solution.n_paths)
    targets[tau.hit] = -g / p_hat

    basis = _poly_basis(conditioning_state, degree)
    if basis.shape[1] == 1:  # constant state: unconditional on every path
        fitted = np.full(solution.n_paths, targets.mean())
    else:
        coef, *_ = np.linalg.lstsq(basis, targets, rcond=None)
        fitted = basis @ coef
    value, se = _mean_se(targets)
    return fitted, RateEstimate(value=value, std_error=se, method="driver_expectation")


# ------------------------------------------------------- finite differences


_DEFAULT_EPS_STEPS = (8, 4, 2, 1)


def rate_finite_difference(
    risk_paths: np.ndarray | SolutionSample,
    at: float | StoppingSample,
    epsilons: Sequence[float] | None = None,
    grid: TimeGrid | None = None,
) -> RateEstimate:
    """Rate as the ε→0 extrapolation of [ρ_{(t+ε)∧T} − ρ_t]/ε.

    Each ε is rounded to a whole number of grid steps (sub-resolution values
    are dropped; at least two distinct survivors are required). The lookahead
    is capped at maturity but the divisor stays ε, matching the defining
    limit. A straight line in ε is fitted per path by least squares; the
    estimate is the mean intercept, its standard error the spread of per-path
    intercepts, and the common random numbers across ε values come for free
    from differencing the same trajectories.
    """
    if isinstance(risk_paths, SolutionSample):
        rho, grid = risk_paths.rho, risk_paths.grid
    else:
        rho = np.asarray(risk_paths, dtype=float)
        if grid is None:
            raise ValueError("grid is required when passing a bare array")
    n = grid.n_steps
    dt = grid.dt
    if epsilons is None:
        epsilons = [m * dt for m in _DEFAULT_EPS_STEPS]
    steps = sorted(
        {int(round(e / dt)) for e in epsilons if int(round(e / dt)) >= 1}, reverse=True
    )
    if len(steps) < 2:
        raise ValueError(
            "epsilon schedule collapses below grid resolution; need >= 2 "
            f"distinct multiples of dt={dt}"
        )
    if steps[0] >= n:
        raise ValueError("largest epsilon must stay below the horizon")

    if isinstance(at, StoppingSample):
        if at.grid != grid:
            raise ValueError("stopping sample and risk paths live on different grids")
        if not at.hit.any():
            raise ValueError(
                "conditional event has empirical probability 0 (no path ever hits)"
            )
        rows = np.flatnonzero(at.hit)
        k0 = at.hit_index[rows]
    else:
        k0 = np.full(rho.shape[0], grid.index_of(float(at)), dtype=int)
        rows = np.arange(rho.shape[0])

    eps = np.array([m * dt for m in steps])
    base = rho[rows, k0]
    diffs = np.empty((rows.size, len(steps)))
    for j, m in enumerate(steps):
        k1 = np.minimum(k0 + m, n)
        diffs[:, j] = (rho[rows, k1] - base) / eps[j]

    design = np.column_stack([np.ones_like(eps), eps])
    weights = np.linalg.pinv(design)  # rows: intercept picker, slope picker
    intercepts = diffs @ weights[0]
    slope = float(weights[1] @ diffs.mean(axis=0))
    value, se = _mean_se(intercepts)
    return RateEstimate(
        value=value,
        std_error=se,
        method="finite_difference",
        epsilons=tuple(eps),
        extrapolation_diag=(slope, value),
    )


# ------------------------------------------------------- backward LSMC oracle


def _poly_basis(x: np.ndarray, degree: int) -> np.ndarray:
    """Standardized monomial columns 1, x̂, x̂², ... (constant-only if x is)."""
    x = np.asarray(x, dtype=float)
    sd = x.std()
    if sd < 1e-12 * (abs(x.mean()) + 1.0):
        return np.ones((x.size, 1))
    xs = (x - x.mean()) / sd
    return np.column_stack([xs**p for p in range(degree + 1)])


def _fit(basis: np.ndarray, target: np.ndarray, what: str) -> np.ndarray:
    coef, _, rank, _ = np.linalg.lstsq(basis, target, rcond=None)
    if rank < basis.shape[1]:
        raise ValueError(
            f"{what}: regression basis is rank deficient; reduce the basis degree"
        )
    return basis @ coef


def lsmc_solve(
    driver: Driver,
    terminal_payoff: np.ndarray,
    states: StatePaths,
    noise: NoiseBundle,
    degree: int = 4,
) -> SolutionSample:
    """Backward least-squares solver: an independent numeric oracle.

    Per time slice, conditional expectations given the Markov state are fitted
    on monomials up to ``degree``; the z component comes from the regression
    of (Y_{k+1} − Ê[Y_{k+1}])·ΔW_k/dt (centering is a control variate for the
    same conditional moment). Only Lipschitz drivers without a jump component
    are accepted.

    The realized Y is propagated backward rather than the fitted one, which
    keeps per-slice projection bias from compounding; each step also subtracts
    the martingale increment ẑ·ΔW_k. That subtraction has zero conditional
    mean, so slice values keep the backward-induction law, while their
    per-path variance collapses to the ẑ-error level — the reported slices
    are then low-noise estimates of Y at the path state. z at the final grid
    point is undefined (NaN).
    """
    if driver.regularity != "lipschitz":
        raise ValueError("lsmc_solve requires a lipschitz driver")
    if driver.jump_aware:
        raise ValueError("lsmc_solve does not handle jump-aware drivers")
    if noise.grid != states.grid:
        raise ValueError("noise and states live on different grids")
    payoff = np.asarray(terminal_payoff, dtype=float)
    n_paths, n_pts = states.values.shape
    if payoff.shape != (n_paths,):
        raise ValueError("terminal payoff must be one value per path")

    grid = states.grid
    dt = grid.dt
    rho = np.empty((n_paths, n_pts))
    z = np.full((n_paths, n_pts), np.nan)
    rho[:, -1] = payoff
    y_real = payoff.copy()
    for k in range(grid.n_steps - 1, -1, -1):
        basis = _poly_basis(states.values[:, k], degree)
        cont = _fit(basis, y_real, f"slice {k} continuation")
        dw = noise.brownian_increments[:, k, 0]
        z[:, k] = _fit(basis, (y_real - cont) * dw, f"slice {k} z component") / dt
        g = np.asarray(
            driver(grid.times[k], cont, z[:, k], None, state=states.values[:, k]),
            dtype=float,
        )
        y_real = y_real + g * dt - z[:, k] * dw
        rho[:, k] = y_real
    return SolutionSample(grid=grid, rho=rho, z=z, state=states.values)


# ------------------------------------------------------------ entropic rates


def entropic_rate_brownian(gamma: float, z_samples: np.ndarray) -> RateEstimate:
    """Rate −(gamma/2)·E[‖Z_t‖²] from samples of the z component."""
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    value, se = _mean_se(-0.5 * gamma * _znorm2(z_samples))
    return RateEstimate(value=value, std_error=se, method="driver_expectation")


def entropic_z_regression(
    gamma: float,
    terminal_samples: np.ndarray,
    brownian_at_t: np.ndarray,
    dw_next: np.ndarray,
    dt: float,
    degree: int = 4,
) -> np.ndarray:
    """Per-path Z_t estimate for the entropic measure by ratio regression.

    Z_t = E[e^{γX}·ΔW_t|F_t] / (γ·dt·E[e^{γX}|F_t]); both conditional
    expectations are fitted on monomials of the Brownian state at t. The
    weights are normalized by max e^{γX} for overflow safety.
    """
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = np.asarray(terminal_samples, dtype=float)
    w = np.exp(gamma * (x - x.max()))
    basis = _poly_basis(np.asarray(brownian_at_t, dtype=float), degree)
    num = _fit(basis, w * np.asarray(dw_next, dtype=float), "entropic z numerator")
    den = _fit(basis, w, "entropic z denominator")
    return num / (gamma * dt * den)


def _poisson_weights(lam: float, tail_tol: float) -> np.ndarray:
    """PMF of Poisson(lam) truncated so the dropped tail mass is < tail_tol."""
    if lam <= 0.0:
        return np.array([1.0])
    hi = int(poisson.isf(tail_tol, lam)) + 2
    return poisson.pmf(np.arange(hi + 1), lam)


def entropic_rate_jump(
    gamma: float,
    jump_rate: float,
    payoff_of_count: Callable[[np.ndarray], np.ndarray],
    horizon: float,
    t: float = 0.0,
    tail_tol: float = 1e-12,
) -> tuple[RateEstimate, RateEstimate]:
    """Entropic rate of a bounded payoff of the jump count, two ways.

    The conditional weight M(t, n) = E[e^{γX}|N_t = n] is a Poisson
    transition sum; its jump increment K = M(t, n+1) − M(t, n) gives the
    representation through the martingale decomposition,
    (rate/γ)·E[ln(1 + K/M) − K/M], while the generator representation first
    recovers the jump component u = (1/γ)·ln(1 + K/M) and evaluates −E[g(u)].
    Both are deterministic; they must agree to floating-point accuracy.

    Raises:
        ValueError: if the positivity bound K/M > −1 + inf(e^{γX})/sup(e^{γX})
            fails (the payoff is then not bounded the way the weights assume).
    """
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if jump_rate < 0.0:
        raise ValueError(f"jump_rate must be >= 0, got {jump_rate}")
    if not 0.0 <= t < horizon:
        raise ValueError(f"need 0 <= t < horizon, got t={t}")

    # conditional weights M(t, n) for every n the time-t count can reach
    w_future = _poisson_weights(jump_rate * (horizon - t), tail_tol)
    w_now = _poisson_weights(jump_rate * t, tail_tol)
    n_now = len(w_now)
    j = np.arange(len(w_future))
    counts = (np.arange(n_now + 1)[:, None] + j[None, :]).astype(float)
    payoff = np.asarray(payoff_of_count(counts), dtype=float)
    if not np.isfinite(payoff).all():
        raise ValueError("payoff_of_count must be finite (bounded payoff required)")
    # K/M is a ratio of conditional weights, so a common shift of the payoff
    # cancels; shifting by the max keeps the exponentials from overflowing.
    weights = np.exp(gamma * (payoff - payoff.max()))
    m = weights @ w_future  # M(t, n) for n = 0..n_now
    k_over_m = m[1:] / m[:-1] - 1.0  # K/M at n = 0..n_now-1

    lo, hi = float(weights.min()), float(weights.max())
    if np.any(k_over_m <= -1.0 + lo / hi - 1e-12):
        raise ValueError(
            "jump increment bound violated: K/M must stay above -1 + c/C "
            "for the weight bounds c, C of the payoff"
        )

    # representation via the martingale decomposition of the weight process
    integrand_1 = np.log1p(k_over_m) - k_over_m
    rate_1 = (jump_rate / gamma) * float(w_now @ integrand_1)

    # representation via the generator: recover u, evaluate g, flip sign
    u = np.log1p(k_over_m) / gamma
    g = (jump_rate / gamma) * (np.expm1(gamma * u) - gamma * u)
    rate_2 = -float(w_now @ g)

    est_1 = RateEstimate(value=rate_1, std_error=0.0, method="closed_form")
    est_2 = RateEstimate(value=rate_2, std_error=0.0, method="closed_form")
    return est_1, est_2


# ------------------------------------------------------- jump-market call


@dataclass(frozen=True)
class JumpCallSpec:
    """Call on an exponential model with multiplicative Poisson jumps."""

    s0: float
    strike: float
    mu: float
    sigma: float
    gamma: float
    jump_rate: float
    horizon: float

    def __post_init__(self) -> None:
        if self.s0 <= 0.0 or self.strike <= 0.0:
            raise ValueError("s0 and strike must be positive")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.gamma <= -1.0:
            raise ValueError(f"jump multiplier must exceed -1, got {self.gamma}")
        if self.jump_rate < 0.0:
            raise ValueError(f"jump_rate must be >= 0, got {self.jump_rate}")
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")


def jump_market_rate_series(
    spec: JumpCallSpec, t: float, tail_tol: float = 1e-10
) -> float:
    """Deterministic evaluation of the jump-market call rate.

    Conditioning on the jump count reduces the expectation to a series of
    Gaussian integrals: rate = mu·s0·e^{mu·t}·Σ_n w_n·N(d_n) with tilted
    Poisson weights w_n. Truncation keeps the dropped mass below ``tail_tol``.

    Raises:
        ValueError: the requested truncation tolerance cannot be certified.
    """
    if not 0.0 <= t < spec.horizon:
        raise ValueError(f"need 0 <= t < horizon, got t={t}")
    if spec.mu == 0.0:
        return 0.0
    mu, sg, T = spec.mu, spec.sigma, spec.horizon
    lam_tilted = spec.jump_rate * T * (1.0 + spec.gamma)
    if spec.jump_rate > 0.0 and spec.gamma != 0.0:
        hi = int(poisson.isf(tail_tol, lam_tilted)) + 2
        if poisson.sf(hi, lam_tilted) > tail_tol:
            raise ValueError(
                "Poisson truncation cannot reach the requested tail tolerance; "
                "increase tail_tol"
            )
        n = np.arange(hi + 1)
        w = np.exp(spec.jump_rate * T * spec.gamma) * poisson.pmf(n, lam_tilted)
    else:
        n = np.arange(1)
        w = np.ones(1)
    b_n = (
        math.log(spec.strike / spec.s0)
        - (mu - 0.5 * sg**2) * T
        - n * math.log1p(spec.gamma)
    ) / sg
    d_n = (sg * t + (sg - mu / sg) * (T - t) - b_n) / math.sqrt(T)
    return float(mu * spec.s0 * math.exp(mu * t) * (w @ ndtr(d_n)))


def jump_market_rate(
    spec: JumpCallSpec,
    t: float,
    n_paths: int = 100_000,
    seed: int = 0,
    tail_tol: float = 1e-10,
) -> RateEstimate:
    """Monte Carlo evaluation of the jump-market call rate at time t.

    Samples (W_t, W_T − W_t, N_T) independently and averages the exponential
    reweighting of the in-the-money payoff; the deterministic series of
    :func:`jump_market_rate_series` is computed alongside, and a mismatch
    beyond 6 standard errors raises (it indicates a sampling or truncation
    defect rather than noise).
    """
    if not 0.0 <= t < spec.horizon:
        raise ValueError(f"need 0 <= t < horizon, got t={t}")
    if n_paths < 2:
        raise ValueError("need at least two paths")
    rng = Generator(Philox(SeedSequence(seed)))
    mu, sg, T = spec.mu, spec.sigma, spec.horizon
    theta = mu / sg
    w_t = rng.normal(0.0, math.sqrt(t), size=n_paths) if t > 0 else np.zeros(n_paths)
    dw = rng.normal(0.0, math.sqrt(T - t), size=n_paths)
    n_T = (
        rng.poisson(spec.jump_rate * T, size=n_paths)
        if spec.jump_rate > 0
        else np.zeros(n_paths, dtype=int)
    )
    s_T = (
        spec.s0
        * np.exp((mu - 0.5 * sg**2) * T + sg * (w_t + dw))
        * (1.0 + spec.gamma) ** n_T
    )
    samples = (
        mu
        * math.exp(-0.5 * theta**2 * (T - t))
        * np.exp(-theta * dw)
        * s_T
        * (s_T >= spec.strike)
    )
    value, se = _mean_se(samples)
    reference = jump_market_rate_series(spec, t, tail_tol=tail_tol)
    if se > 0 and abs(value - reference) > 6.0 * se:
        raise ValueError(
            f"Monte Carlo rate {value:.6g} deviates from the deterministic "
            f"series {reference:.6g} by more than 6 standard errors"
        )
    return RateEstimate(value=value, std_error=se, method="driver_expectation")


# ----------------------------------------------- two-sided discounting rates


def ambiguous_rate_value_and_rate(
    r_fn,
    big_r_fn,
    payoff_samples: np.ndarray,
    t: float,
    horizon: float,
) -> tuple[float, RateEstimate]:
    """Expected risk and rate under two-sided discounting of X⁺ and X⁻.

    The positive part discounts at the lending rate r, the negative part at
    the borrowing rate R ≥ r (both deterministic): value = E[X⁺]e^{−∫ₜᵀr} −
    E[X⁻]e^{−∫ₜᵀR}; rate = E[r_t X⁺ e^{−∫ₜᵀr} − R_t X⁻ e^{−∫ₜᵀR}].
    """

    def as_step(f):
        return f if isinstance(f, PiecewiseConstant) else PiecewiseConstant(
            knots=(0.0,), values=(float(f),)
        )

    if not 0.0 <= t <= horizon:
        raise ValueError(f"t={t} outside [0, {horizon}]")
    r, big_r = as_step(r_fn), as_step(big_r_fn)
    ts = np.linspace(0.0, horizon, 101)
    r_vals, big_vals = r(ts), big_r(ts)
    if np.any(r_vals < -1e-12) or np.any(big_vals + 1e-12 < r_vals):
        raise ValueError("need 0 <= r <= R everywhere on [0, T]")

    x = np.asarray(payoff_samples, dtype=float)
    disc_r = math.exp(-r.integral(t, horizon))
    disc_R = math.exp(-big_r.integral(t, horizon))
    pos, neg = np.maximum(x, 0.0), np.maximum(-x, 0.0)
    value = float(pos.mean()) * disc_r - float(neg.mean()) * disc_R
    rate_samples = r(t) * pos * disc_r - big_r(t) * neg * disc_R
    rate, se = _mean_se(rate_samples)
    return value, RateEstimate(value=rate, std_error=se, method="driver_expectation")
