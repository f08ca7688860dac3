"""End-to-end built-in scenarios: rate tables, stopping rates, CSV emission.

Each runner evaluates one model setup at desk scale: it simulates the risk
factors, evaluates the risk trajectory in closed form where one exists,
estimates the resilience rate by the two independent Monte Carlo routes
(driver expectation and finite differences of the trajectory), and collects
everything into a :class:`ScenarioReport` whose rows carry all three method
columns (or an explicit "na"). :func:`write_report` emits the standard files
``rates.csv``, ``stopping.csv``, ``meta.json`` and ``plotspec.txt`` (plus
named extra tables such as parameter sweeps) into the scenario's own output
directory; reruns with the same config produce identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import poisson

from . import __version__
from .bsde_engine import (
    Driver,
    JumpCallSpec,
    SolutionSample,
    ambiguous_driver,
    ambiguous_rate_value_and_rate,
    bond_driver,
    entropic_brownian_driver,
    entropic_jump_driver,
    entropic_rate_jump,
    jump_market_rate,
    jump_market_rate_series,
    linear_brownian_driver,
    rate_driver_expectation,
    rate_finite_difference,
    zero_driver,
)
from .risk_closed_forms import (
    BSPutSpec,
    VasicekBondSpec,
    bs_put_price,
    bs_put_rate_t,
    exp_payoff_rate,
    vasicek_bond_price,
    vasicek_rate_t,
)
from .stochastic_core import (
    StoppingSample,
    TimeGrid,
    first_hitting,
    make_time_grid,
    sample_noise,
    simulate_gbm,
    simulate_vasicek,
)

__all__ = [
    "SCENARIO_IDS",
    "BandCheck",
    "RateRow",
    "ScenarioConfig",
    "ScenarioReport",
    "StoppingRow",
    "config_defaults",
    "make_config",
    "run_appD_sweep",
    "run_example",
    "run_fig1",
    "run_fig2",
    "run_scenario",
    "write_report",
]

SCENARIO_IDS = (
    "fig1_put",
    "fig2_vasicek",
    "appC1_exp_payoff",
    "appD_sweep",
    "ex53_ambiguous",
    "ex54_entropic_brownian",
    "ex55_martingale",
    "ex56_jump_call",
    "ex37_entropic_jump",
)

# Model parameters per scenario; "threshold" is the first-hitting barrier
# where the scenario defines one (on the risk value unless noted). Barriers
# without a headline attached are desk choices, frozen here.
_DEFAULTS: dict[str, dict] = {
    "fig1_put": dict(
        params=dict(s0=1000.0, strike=1000.0, mu=0.10, sigma=0.10, horizon=1.0),
        n_paths=100_000,
        n_steps=252,
        threshold=80.0,
    ),
    "fig2_vasicek": dict(
        params=dict(r0=0.02, a=1.0, b=0.02, sigma=0.01, horizon=1.0),
        n_paths=100_000,
        n_steps=252,
        threshold=0.05,  # barrier on the short rate, not on the bond price
    ),
    "appC1_exp_payoff": dict(
        params=dict(mu=0.10, sigma=0.10, horizon=1.0),
        n_paths=100_000,
        n_steps=64,
        threshold=None,
    ),
    "appD_sweep": dict(
        params=dict(
            r0=0.02,
            b=0.04,
            sigma=0.01,
            horizon=1.0,
            a_grid=(0.25, 0.5, 1.0, 2.0, 4.0, 8.0),
        ),
        n_paths=100_000,
        n_steps=64,
        threshold=None,
    ),
    "ex53_ambiguous": dict(
        params=dict(
            s0=1.0, mu=0.05, sigma=0.2, lend_rate=0.02, borrow_rate=0.05, horizon=1.0
        ),
        n_paths=100_000,
        n_steps=64,
        threshold=1.082,
    ),
    "ex54_entropic_brownian": dict(
        params=dict(c=1.0, gamma=1.0, gamma_grid=(0.5, 1.0, 2.0), horizon=1.0),
        n_paths=100_000,
        n_steps=64,
        threshold=1.0,
    ),
    "ex55_martingale": dict(
        params=dict(s0=1000.0, mu=0.10, sigma=0.10, horizon=1.0),
        n_paths=100_000,
        n_steps=64,
        threshold=1160.0,
    ),
    "ex56_jump_call": dict(
        params=dict(
            s0=1.0,
            strike=1.0,
            mu=0.1,
            sigma=0.2,
            jump_size=0.1,
            jump_rate=1.0,
            horizon=1.0,
        ),
        n_paths=100_000,
        n_steps=64,
        threshold=None,
    ),
    "ex37_entropic_jump": dict(
        params=dict(beta=0.5, cap=5, jump_rate=2.0, gamma=1.0, horizon=1.0),
        n_paths=20_000,
        n_steps=64,
        threshold=1.45,
    ),
}

# headline values for the two figure scenarios, with frozen desk-scale
# relative tolerances
_TARGETS: dict[str, tuple[float, float]] = {
    "fig1_put": (-78.0, 0.05),
    "fig2_vasicek": (0.050, 0.10),
}

_REPORT_FRACTIONS = (0.0, 0.1, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully resolved scenario run request."""

    scenario_id: str
    params: Mapping[str, object]
    n_paths: int
    n_steps: int
    seed: int
    threshold: float | None
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.scenario_id not in SCENARIO_IDS:
            raise ValueError(
                f"unknown scenario_id {self.scenario_id!r}; "
                f"choose one of {', '.join(SCENARIO_IDS)}"
            )
        if int(self.n_paths) < 2:
            raise ValueError(f"n_paths must be at least 2, got {self.n_paths}")
        if int(self.n_steps) < 8:
            raise ValueError(f"n_steps must be at least 8, got {self.n_steps}")
        if int(self.seed) < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        if self.threshold is not None and not math.isfinite(self.threshold):
            raise ValueError(f"threshold must be finite, got {self.threshold}")


def config_defaults(scenario_id: str) -> dict:
    """The frozen default field values for one scenario."""
    if scenario_id not in _DEFAULTS:
        raise ValueError(
            f"unknown scenario_id {scenario_id!r}; "
            f"choose one of {', '.join(SCENARIO_IDS)}"
        )
    d = _DEFAULTS[scenario_id]
    return dict(
        scenario_id=scenario_id,
        params=dict(d["params"]),
        n_paths=d["n_paths"],
        n_steps=d["n_steps"],
        seed=0,
        threshold=d["threshold"],
    )


def make_config(scenario_id: str, out_dir: str | None = None, **overrides) -> ScenarioConfig:
    """Build a config from the scenario defaults plus explicit overrides.

    Override keys must name either a top-level field (n_paths, n_steps,
    seed, threshold) or a model parameter the scenario actually has; anything
    else is rejected with the offending field named.
    """
    base = config_defaults(scenario_id)
    params = base["params"]
    top = {"n_paths", "n_steps", "seed", "threshold"}
    for key, value in overrides.items():
        if key in top:
            base[key] = value
        elif key in params:
            params[key] = value
        else:
            raise ValueError(
                f"unknown field {key!r} for scenario {scenario_id}; "
                f"known fields: {sorted(top | set(params))}"
            )
    return ScenarioConfig(
        scenario_id=scenario_id,
        params=params,
        n_paths=int(base["n_paths"]),
        n_steps=int(base["n_steps"]),
        seed=int(base["seed"]),
        threshold=None if base["threshold"] is None else float(base["threshold"]),
        out_dir=out_dir,
    )


@dataclass(frozen=True)
class RateRow:
    """One reported instant; None marks a method not applicable here."""

    t: float
    closed_form: float | None
    driver_mc: float | None
    driver_se: float | None
    fd_mc: float | None
    fd_se: float | None


@dataclass(frozen=True)
class StoppingRow:
    method: str
    value: float | None
    se: float | None
    hit_prob: float


@dataclass(frozen=True)
class BandCheck:
    """One acceptance-band verdict attached to the report."""

    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ScenarioReport:
    config: ScenarioConfig
    rate_rows: list[RateRow]
    stopping_rows: list[StoppingRow]
    bands: list[BandCheck]
    # named extra tables: name -> (header, rows); written as <name>.csv
    extras: dict[str, tuple[tuple[str, ...], list[tuple]]] = field(
        default_factory=dict
    )

    @property
    def all_bands_pass(self) -> bool:
        return all(b.passed for b in self.bands)


# ------------------------------------------------------------------ plumbing


def _report_indices(grid: TimeGrid) -> list[int]:
    ks = sorted({int(round(f * grid.n_steps)) for f in _REPORT_FRACTIONS})
    return [k for k in ks if k < grid.n_steps]


def _dual_band(t_label: str, fd, dx) -> BandCheck:
    se = math.hypot(fd.std_error, dx.std_error)
    gap = abs(fd.value - dx.value)
    return BandCheck(
        f"dual_agreement@{t_label}",
        gap <= 4.0 * se,
        f"|fd - driver| = {gap:.4g} vs 4*SE = {4 * se:.4g}",
    )


def _closed_band(t_label: str, closed: float, dx) -> BandCheck:
    gap = abs(dx.value - closed)
    # the round-off floor covers degenerate instants (t = 0) where every
    # path carries the same value and the statistical SE collapses
    tol = max(4.0 * dx.std_error, 1e-9 * max(1.0, abs(closed)))
    return BandCheck(
        f"closed_form_agreement@{t_label}",
        gap <= tol,
        f"|mc - closed| = {gap:.4g} vs tolerance {tol:.4g}",
    )


def _stopping_block(
    driver: Driver, sol: SolutionSample, tau: StoppingSample
) -> tuple[list[StoppingRow], list[BandCheck]]:
    hp = tau.hit_fraction
    if tau.n_hit == 0:
        rows = [
            StoppingRow("driver_expectation", None, None, 0.0),
            StoppingRow("finite_difference", None, None, 0.0),
        ]
        return rows, [
            BandCheck(
                "dual_agreement@stopping", True, "no path hit; nothing to compare"
            )
        ]
    dx = rate_driver_expectation(driver, sol, tau)
    fd = rate_finite_difference(sol, at=tau)
    rows = [
        StoppingRow("driver_expectation", dx.value, dx.std_error, hp),
        StoppingRow("finite_difference", fd.value, fd.std_error, hp),
    ]
    return rows, [_dual_band("stopping", fd, dx)]


def _target_band(
    scenario_id: str, stopping_rows: list[StoppingRow], tolerance_scale: float = 1.0
) -> list[BandCheck]:
    if scenario_id not in _TARGETS:
        return []
    target, tol = _TARGETS[scenario_id]
    tol *= tolerance_scale
    row = next((r for r in stopping_rows if r.method == "driver_expectation"), None)
    if row is None or row.value is None:
        return [BandCheck("headline_target@stopping", False, "no hit paths")]
    rel = abs(row.value - target) / abs(target)
    return [
        BandCheck(
            "headline_target@stopping",
            rel <= tol,
            f"stopping rate {row.value:.4g} vs {target:.4g} "
            f"(rel {rel:.3f}, tol {tol:.3g})",
        )
    ]


def _rate_table(
    sol: SolutionSample,
    driver: Driver,
    closed_fn,
    grid: TimeGrid,
    with_fd: bool = True,
) -> tuple[list[RateRow], list[BandCheck]]:
    rows: list[RateRow] = []
    bands: list[BandCheck] = []
    for k in _report_indices(grid):
        t = float(grid.times[k])
        closed = None if closed_fn is None else float(closed_fn(t))
        dx = rate_driver_expectation(driver, sol, t)
        if with_fd:
            fd = rate_finite_difference(sol, at=t)
            fd_v, fd_se = fd.value, fd.std_error
            # the probe instant is (t + eps) ∧ T by definition, so once the
            # largest rung crosses maturity the ladder is no longer linear in
            # eps and the extrapolated value carries an O(dt) clamp bias; the
            # column is still reported, but not held to the agreement band
            if t + fd.epsilons[0] <= grid.horizon + 1e-12:
                bands.append(_dual_band(f"t={t:.4g}", fd, dx))
        else:
            fd_v = fd_se = None
        rows.append(RateRow(t, closed, dx.value, dx.std_error, fd_v, fd_se))
        if closed is not None:
            bands.append(_closed_band(f"t={t:.4g}", closed, dx))
    return rows, bands


# ------------------------------------------------------------------ figure 1


def run_fig1(config: ScenarioConfig, tolerance_scale: float = 1.0) -> ScenarioReport:
    """Protective put: rate curve three ways plus the barrier-hit rate."""
    p = config.params
    spec = BSPutSpec(
        s0=p["s0"], strike=p["strike"], mu=p["mu"], sigma=p["sigma"],
        horizon=p["horizon"],
    )
    grid = make_time_grid(spec.horizon, config.n_steps)
    noise = sample_noise(grid, config.n_paths, seed=config.seed)
    s = simulate_gbm(grid, spec.s0, spec.mu, spec.sigma, noise).values
    rho = np.empty_like(s)
    z = np.empty_like(s)
    for k, t in enumerate(grid.times):
        rho[:, k] = bs_put_price(spec, t, s[:, k])
        if t < grid.horizon:
            z[:, k] = -spec.sigma * s[:, k] * ndtr(-spec.d_plus(t, s[:, k]))
        else:
            z[:, k] = 0.0
    sol = SolutionSample(grid=grid, rho=rho, z=z, state=s)
    driver = linear_brownian_driver(spec.mu, spec.sigma)

    rows, bands = _rate_table(sol, driver, lambda t: bs_put_rate_t(spec, t), grid)

    tau = first_hitting(rho, config.threshold, ">=", grid=grid)
    stopping, stop_bands = _stopping_block(driver, sol, tau)
    bands += stop_bands + _target_band(config.scenario_id, stopping, tolerance_scale)

    trajectory = [(float(t), float(m)) for t, m in zip(grid.times, rho.mean(axis=0))]
    return ScenarioReport(
        config=config,
        rate_rows=rows,
        stopping_rows=stopping,
        bands=bands,
        extras={"trajectory": (("t", "mean_value"), trajectory)},
    )


# ------------------------------------------------------------------ figure 2


def _vasicek_solution(
    spec: VasicekBondSpec, n_paths: int, n_steps: int, seed: int
) -> tuple[SolutionSample, np.ndarray]:
    grid = make_time_grid(spec.horizon, n_steps)
    noise = sample_noise(grid, n_paths, seed=seed)
    r = simulate_vasicek(grid, spec.r0, spec.a, spec.b, spec.sigma, noise).values
    rho = np.column_stack(
        [vasicek_bond_price(spec, t, r[:, k]) for k, t in enumerate(grid.times)]
    )
    return SolutionSample(grid=grid, rho=rho, z=np.zeros_like(rho), state=r), r


def run_fig2(config: ScenarioConfig, tolerance_scale: float = 1.0) -> ScenarioReport:
    """Zero-coupon bond under a mean-reverting rate, barrier on the rate."""
    p = config.params
    spec = VasicekBondSpec(
        r0=p["r0"], a=p["a"], b=p["b"], sigma=p["sigma"], horizon=p["horizon"]
    )
    sol, r = _vasicek_solution(spec, config.n_paths, config.n_steps, config.seed)
    driver = bond_driver(from_state=True)
    rows, bands = _rate_table(sol, driver, lambda t: vasicek_rate_t(spec, t), sol.grid)

    tau = first_hitting(r, config.threshold, ">=", grid=sol.grid)
    stopping, stop_bands = _stopping_block(driver, sol, tau)
    bands += stop_bands + _target_band(config.scenario_id, stopping, tolerance_scale)
    return ScenarioReport(
        config=config, rate_rows=rows, stopping_rows=stopping, bands=bands
    )


# -------------------------------------------------- mean-reversion speed sweep


def run_appD_sweep(config: ScenarioConfig) -> ScenarioReport:
    """Rate curves across mean-reversion speeds plus a monotonicity report.

    The main table carries the grid value closest to 1/y; the ``sweep`` extra
    holds the closed-form curve per speed and the finite-difference estimate
    of the rate at t = 0, whose standard error backs the adjacent-pair
    monotonicity bands (|rate at 0| nondecreasing in the speed, within 1 SE).
    """
    p = config.params
    a_grid = tuple(float(a) for a in p["a_grid"])
    if len(a_grid) == 0:
        raise ValueError("a_grid must not be empty")
    grid = make_time_grid(p["horizon"], config.n_steps)
    noise = sample_noise(grid, config.n_paths, seed=config.seed)
    driver = bond_driver(from_state=True)

    sweep_rows: list[tuple] = []
    at_zero: list[tuple[float, float, float, float]] = []  # a, closed, fd, se
    rep_a = min(a_grid, key=lambda a: abs(a - 1.0))
    rep_report: tuple[list[RateRow], list[BandCheck]] | None = None

    for a in a_grid:
        spec = VasicekBondSpec(
            r0=p["r0"], a=a, b=p["b"], sigma=p["sigma"], horizon=p["horizon"]
        )
        r = simulate_vasicek(grid, spec.r0, spec.a, spec.b, spec.sigma, noise).values
        rho = np.column_stack(
            [vasicek_bond_price(spec, t, r[:, k]) for k, t in enumerate(grid.times)]
        )
        sol = SolutionSample(grid=grid, rho=rho, z=np.zeros_like(rho), state=r)
        fd0 = rate_finite_difference(sol, at=0.0)
        closed0 = vasicek_rate_t(spec, 0.0)
        at_zero.append((a, closed0, fd0.value, fd0.std_error))
        for k in _report_indices(grid):
            t = float(grid.times[k])
            sweep_rows.append((a, t, vasicek_rate_t(spec, t)))
        if a == rep_a:
            rep_report = _rate_table(
                sol, driver, lambda t: vasicek_rate_t(spec, t), grid
            )

    rows, bands = rep_report
    for (a1, _, f1, s1), (a2, _, f2, s2) in zip(at_zero, at_zero[1:]):
        se = math.hypot(s1, s2)
        ok = abs(f2) >= abs(f1) - se
        bands.append(
            BandCheck(
                f"monotone_at0@a={a1:g}->{a2:g}",
                ok,
                f"|rate| {abs(f1):.5g} -> {abs(f2):.5g} (1 SE = {se:.2g})",
            )
        )

    extras = {
        "sweep": (("a", "t", "closed_form"), sweep_rows),
        "sweep_t0": (
            ("a", "closed_form", "fd_mc", "fd_se"),
            [tuple(row) for row in at_zero],
        ),
    }
    return ScenarioReport(
        config=config, rate_rows=rows, stopping_rows=[], bands=bands, extras=extras
    )


# ---------------------------------------------------------- example scenarios


def _run_ex53(config: ScenarioConfig) -> ScenarioReport:
    """Two-sided discounting of a nonnegative claim (bounds collapse to r)."""
    p = config.params
    r, big_r, T = p["lend_rate"], p["borrow_rate"], p["horizon"]
    grid = make_time_grid(T, config.n_steps)
    noise = sample_noise(grid, config.n_paths, seed=config.seed)
    s = simulate_gbm(grid, p["s0"], p["mu"], p["sigma"], noise).values
    # X = S_T >= 0, so the evaluation discounts at the lending rate throughout
    growth = np.exp((p["mu"] - r) * (T - grid.times))[None, :]
    rho = s * growth
    z = p["sigma"] * rho
    sol = SolutionSample(grid=grid, rho=rho, z=z, state=s)
    driver = ambiguous_driver(r, big_r)

    mean_x = p["s0"] * math.exp(p["mu"] * T)
    rows, bands = _rate_table(
        sol, driver, lambda t: r * mean_x * math.exp(-r * (T - t)), grid
    )
    # the terminal-sample route must land on the same rate (one more oracle)
    payoff = s[:, -1]
    for t in (0.25 * T,):
        _, est = ambiguous_rate_value_and_rate(r, big_r, payoff, t, T)
        dx = rate_driver_expectation(driver, sol, t)
        se = math.hypot(est.std_error, dx.std_error)
        gap = abs(est.value - dx.value)
        bands.append(
            BandCheck(
                f"payoff_route@t={t:.4g}",
                gap <= 4.0 * se,
                f"|terminal route - driver| = {gap:.4g} vs 4*SE = {4 * se:.4g}",
            )
        )

    tau = first_hitting(rho, config.threshold, ">=", grid=grid)
    stopping, stop_bands = _stopping_block(driver, sol, tau)
    return ScenarioReport(
        config=config,
        rate_rows=rows,
        stopping_rows=stopping,
        bands=bands + stop_bands,
    )


def _run_ex54(config: ScenarioConfig) -> ScenarioReport:
    """Entropic evaluation of a scaled Brownian claim: rate −γc²/2, flat."""
    p = config.params
    c, gamma, T = p["c"], p["gamma"], p["horizon"]
    grid = make_time_grid(T, config.n_steps)
    noise = sample_noise(grid, config.n_paths, seed=config.seed)
    w = np.concatenate(
        [
            np.zeros((config.n_paths, 1)),
            np.cumsum(noise.brownian_increments[:, :, 0], axis=1),
        ],
        axis=1,
    )

    def solution_for(g: float) -> SolutionSample:
        rho = c * w + 0.5 * g * c**2 * (T - grid.times)[None, :]
        return SolutionSample(grid=grid, rho=rho, z=np.full_like(rho, c))

    sol = solution_for(gamma)
    driver = entropic_brownian_driver(gamma)
    rows, bands = _rate_table(sol, driver, lambda t: -0.5 * gamma * c**2, grid)

    sweep_rows = []
    previous = None
    monotone = True
    for g in p["gamma_grid"]:
        est = rate_driver_expectation(
            entropic_brownian_driver(g), solution_for(g), 0.25 * T
        )
        sweep_rows.append((g, -0.5 * g * c**2, est.value, est.std_error))
        if previous is not None:
            monotone &= est.value < previous
        previous = est.value
    bands.append(
        BandCheck(
            "gamma_monotonicity",
            monotone,
            "rate strictly more negative along the gamma grid "
            + str(tuple(p["gamma_grid"])),
        )
    )

    tau = first_hitting(sol.rho, config.threshold, ">=", grid=grid)
    stopping, stop_bands = _stopping_block(driver, sol, tau)
    return ScenarioReport(
        config=config,
        rate_rows=rows,
        stopping_rows=stopping,
        bands=bands + stop_bands,
        extras={"sweep": (("gamma", "closed_form", "driver_mc", "driver_se"), sweep_rows)},
    )


def _run_ex55(config: ScenarioConfig) -> ScenarioReport:
    """Plain conditional expectation of a terminal claim: every rate is zero."""
    p = config.params
    T = p["horizon"]
    grid = make_time_grid(T, config.n_steps)
    noise = sample_noise(grid, config.n_paths, seed=config.seed)
    s = simulate_gbm(grid, p["s0"], p["mu"], p["sigma"], noise).values
    growth = np.exp(p["mu"] * (T - grid.times))[None, :]
    rho = s * growth
    sol = SolutionSample(grid=grid, rho=rho, z=p["sigma"] * rho, state=s)
    driver = zero_driver()
    rows, bands = _rate_table(sol, driver, lambda t: 0.0, grid)
    tau = first_hitting(rho, config.threshold, ">=", grid=grid)
    stopping, stop_bands = _stopping_block(driver, sol, tau)
    return ScenarioReport(
        config=config,
        rate_rows=rows,
        stopping_rows=stopping,
        bands=bands + stop_bands,
    )


def _run_ex56(config: ScenarioConfig) -> ScenarioReport:
    """Call in a jump market: series evaluation vs direct Monte Carlo."""
    p = config.params
    spec = JumpCallSpec(
        s0=p["s0"],
        strike=p["strike"],
        mu=p["mu"],
        sigma=p["sigma"],
        gamma=p["jump_size"],
        jump_rate=p["jump_rate"],
        horizon=p["horizon"],
    )
    grid = make_time_grid(spec.horizon, config.n_steps)
    rows: list[RateRow] = []
    bands: list[BandCheck] = []
    for j, k in enumerate(_report_indices(grid)):
        t = float(grid.times[k])
        closed = jump_market_rate_series(spec, t)
        est = jump_market_rate(
            spec, t, n_paths=config.n_paths, seed=config.seed + j
        )
        rows.append(RateRow(t, closed, est.value, est.std_error, None, None))
        bands.append(_closed_band(f"t={t:.4g}", closed, est))
    return ScenarioReport(
        config=config, rate_rows=rows, stopping_rows=[], bands=bands
    )


def _capped_count_weights(
    t: float, beta: float, cap: int, lam: float, gamma: float, horizon: float,
    n_max: int, tol: float = 1e-12,
) -> np.ndarray:
    """M(t, n) = E[e^{γ·β·min(n + J, cap)}] for n = 0..n_max, J ~ Poisson."""
    remaining = lam * (horizon - t)
    if remaining <= 0.0:
        j = np.array([0])
    else:
        j_hi = int(poisson.isf(tol, remaining)) + 2
        j = np.arange(j_hi + 1)
    pmf = poisson.pmf(j, remaining)
    n = np.arange(n_max + 1)
    payoff = beta * np.minimum(n[None, :] + j[:, None], cap)
    return pmf @ np.exp(gamma * payoff)


def _run_ex37(config: ScenarioConfig) -> ScenarioReport:
    """Entropic rate of a capped jump-count claim: both representations,
    plus path-based finite differences and a stopping-time read."""
    p = config.params
    beta, cap, lam, gamma, T = (
        p["beta"], int(p["cap"]), p["jump_rate"], p["gamma"], p["horizon"],
    )
    grid = make_time_grid(T, config.n_steps)
    noise = sample_noise(grid, config.n_paths, jump_rate=lam, seed=config.seed)
    counts = np.concatenate(
        [
            np.zeros((config.n_paths, 1), dtype=int),
            np.cumsum(noise.poisson_counts, axis=1),
        ],
        axis=1,
    )
    n_max = int(counts.max()) + 1
    rho = np.empty(counts.shape, dtype=float)
    u = np.empty_like(rho)
    for k, t in enumerate(grid.times):
        m = _capped_count_weights(t, beta, cap, lam, gamma, T, n_max)
        log_m = np.log(m)
        rho[:, k] = log_m[counts[:, k]] / gamma
        u[:, k] = (log_m[counts[:, k] + 1] - log_m[counts[:, k]]) / gamma
    sol = SolutionSample(
        grid=grid, rho=rho, z=np.zeros_like(rho), u_surrogate=u
    )
    driver = entropic_jump_driver(gamma, lam)

    def payoff_of_count(n):
        return beta * np.minimum(np.asarray(n, dtype=float), cap)

    rows: list[RateRow] = []
    bands: list[BandCheck] = []
    for k in _report_indices(grid):
        t = float(grid.times[k])
        rep1, rep2 = entropic_rate_jump(gamma, lam, payoff_of_count, T, t)
        fd = rate_finite_difference(sol, at=t)
        rows.append(
            RateRow(t, rep1.value, rep2.value, rep2.std_error, fd.value, fd.std_error)
        )
        rel = abs(rep1.value - rep2.value) / max(abs(rep1.value), 1e-300)
        bands.append(
            BandCheck(
                f"representation_agreement@t={t:.4g}",
                rel <= 1e-6,
                f"relative gap {rel:.2e}",
            )
        )
        if t + fd.epsilons[0] <= grid.horizon + 1e-12:  # unclamped ladder only
            gap = abs(fd.value - rep1.value)
            bands.append(
                BandCheck(
                    f"fd_vs_analytic@t={t:.4g}",
                    gap <= 4.0 * fd.std_error,
                    f"|fd - analytic| = {gap:.4g} vs 4*SE = {4 * fd.std_error:.4g}",
                )
            )

    tau = first_hitting(rho, config.threshold, ">=", grid=grid)
    stopping, stop_bands = _stopping_block(driver, sol, tau)
    return ScenarioReport(
        config=config,
        rate_rows=rows,
        stopping_rows=stopping,
        bands=bands + stop_bands,
    )


def _run_appC1(config: ScenarioConfig) -> ScenarioReport:
    """Exponential claim: rate and volatility loading, closed form vs MC.

    The volatility-loading route evaluates θ·E[Z̃_t] on simulated Brownian
    paths. Both columns carry the same normalization constant by
    construction, so the agreement band checks internal consistency of the
    pair rather than an external derivation; finite differences on this
    trajectory share the constant too and ride along as a third column.
    """
    p = config.params
    mu, sigma, T = p["mu"], p["sigma"], p["horizon"]
    spec = BSPutSpec(s0=1.0, strike=1.0, mu=mu, sigma=sigma, horizon=T)
    grid = make_time_grid(T, config.n_steps)
    noise = sample_noise(grid, config.n_paths, seed=config.seed)
    w = np.concatenate(
        [
            np.zeros((config.n_paths, 1)),
            np.cumsum(noise.brownian_increments[:, :, 0], axis=1),
        ],
        axis=1,
    )
    theta = mu / sigma
    const = mu**2 * T / (2.0 * sigma**2)
    z_tilde = sigma * np.exp(
        sigma * w
        + const
        + (0.5 * sigma**2 - mu) * (T - grid.times)[None, :]
    )
    sol = SolutionSample(grid=grid, rho=z_tilde / sigma, z=z_tilde)
    driver = linear_brownian_driver(mu, sigma)
    rows, bands = _rate_table(sol, driver, lambda t: exp_payoff_rate(spec, t), grid)
    return ScenarioReport(
        config=config, rate_rows=rows, stopping_rows=[], bands=bands
    )


_EXAMPLE_RUNNERS = {
    "ex53_ambiguous": _run_ex53,
    "ex54_entropic_brownian": _run_ex54,
    "ex55_martingale": _run_ex55,
    "ex56_jump_call": _run_ex56,
    "ex37_entropic_jump": _run_ex37,
    "appC1_exp_payoff": _run_appC1,
}


def run_example(config: ScenarioConfig) -> ScenarioReport:
    """Run one of the example scenarios (everything but the figures
    and the mean-reversion sweep)."""
    try:
        runner = _EXAMPLE_RUNNERS[config.scenario_id]
    except KeyError:
        raise ValueError(
            f"{config.scenario_id!r} is not an example scenario; "
            f"choose one of {sorted(_EXAMPLE_RUNNERS)}"
        ) from None
    return runner(config)


def run_scenario(config: ScenarioConfig, tolerance_scale: float = 1.0) -> ScenarioReport:
    """Dispatch a config to its runner.

    ``tolerance_scale`` multiplies the headline-target tolerance of the two
    figure scenarios (e.g. 0.4 tightens 5%/10% to 2%/4% for large-path runs);
    the statistical 4-SE bands are never rescaled.
    """
    if tolerance_scale <= 0 or not math.isfinite(tolerance_scale):
        raise ValueError(f"tolerance_scale must be positive, got {tolerance_scale}")
    if config.scenario_id == "fig1_put":
        return run_fig1(config, tolerance_scale)
    if config.scenario_id == "fig2_vasicek":
        return run_fig2(config, tolerance_scale)
    if config.scenario_id == "appD_sweep":
        return run_appD_sweep(config)
    return run_example(config)


# ------------------------------------------------------------------ emission


def _fmt(x) -> str:
    if x is None:
        return "na"
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _csv_lines(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _plotspec(report: ScenarioReport) -> str:
    cfg = report.config
    lines = [
        f"scenario: {cfg.scenario_id}",
        "x: t [years]",
        "y: resilience rate [value units per year]",
        "file: rates.csv",
        "series: closed_form, driver_mc (band driver_se), fd_mc (band fd_se)",
        "markers: na entries mean the method does not apply at that instant",
    ]
    if report.stopping_rows:
        lines += [
            "file: stopping.csv",
            "series: rate at the first-hitting time, one row per method",
        ]
    for name, (header, _) in sorted(report.extras.items()):
        lines += [f"file: {name}.csv", f"series: {', '.join(header)}"]
    return "\n".join(lines) + "\n"


def write_report(report: ScenarioReport, out_dir: str | None = None) -> list[Path]:
    """Write the standard files (plus extras) under <out>/<scenario_id>/."""
    root = Path(out_dir or report.config.out_dir or "out")
    base = root / report.config.scenario_id
    base.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    rates = base / "rates.csv"
    rates.write_text(
        _csv_lines(
            ("t", "closed_form", "driver_mc", "driver_se", "fd_mc", "fd_se"),
            [
                (r.t, r.closed_form, r.driver_mc, r.driver_se, r.fd_mc, r.fd_se)
                for r in report.rate_rows
            ],
        )
    )
    written.append(rates)

    stopping = base / "stopping.csv"
    stopping.write_text(
        _csv_lines(
            ("method", "value", "se", "hit_prob"),
            [(r.method, r.value, r.se, r.hit_prob) for r in report.stopping_rows],
        )
    )
    written.append(stopping)

    meta = base / "meta.json"
    cfg = report.config
    meta.write_text(
        json.dumps(
            {
                "scenario_id": cfg.scenario_id,
                "params": {k: v for k, v in sorted(cfg.params.items())},
                "n_paths": cfg.n_paths,
                "n_steps": cfg.n_steps,
                "dt": cfg.params["horizon"] / cfg.n_steps,
                "seed": cfg.seed,
                "threshold": cfg.threshold,
                "version": __version__,
                "bands": [
                    {"name": b.name, "passed": b.passed, "detail": b.detail}
                    for b in report.bands
                ],
            },
            sort_keys=True,
            indent=2,
        )
        + "\n"
    )
    written.append(meta)

    for name, (header, rows) in sorted(report.extras.items()):
        extra = base / f"{name}.csv"
        extra.write_text(_csv_lines(header, rows))
        written.append(extra)

    spec_file = base / "plotspec.txt"
    spec_file.write_text(_plotspec(report))
    written.append(spec_file)
    return written
