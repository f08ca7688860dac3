"""Seed-reproducible path simulation and first-hitting-time extraction.

All randomness flows through per-path streams of the counter-based Philox
generator: the stream for path ``i`` is a pure function of ``(seed, i)``, so
ensembles are bit-identical regardless of how many paths are drawn or how the
consumer schedules work across threads. Brownian and Poisson components of a
path use distinct sub-streams, so enabling jumps never perturbs the Brownian
increments.

Simulators use exact per-step transitions (log-Euler for the exponential
models, the Gaussian transition for the mean-reverting rate), which keeps the
grid marginals free of discretization bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

__all__ = [
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
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discretization of [0, T] with points t_k = k·dt."""

    horizon: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        """Grid points, shape (n_steps + 1,), t_0 = 0 and t_{n} = T exactly."""
        return np.linspace(0.0, self.horizon, self.n_steps + 1)

    def index_of(self, t: float) -> int:
        """Grid index of a time that must lie (numerically) on the grid.

        Raises:
            ValueError: if ``t`` is outside [0, T] or more than 1e-9·dt away
                from the nearest grid point.
        """
        if t < -1e-12 or t > self.horizon * (1 + 1e-12):
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        k = int(round(t / self.dt))
        k = min(max(k, 0), self.n_steps)
        if abs(k * self.dt - t) > 1e-9 * max(self.dt, 1.0):
            raise ValueError(f"t={t} does not lie on the grid (dt={self.dt})")
        return k


def make_time_grid(horizon: float, n_steps: int) -> TimeGrid:
    """Build a uniform time grid on [0, horizon] with ``n_steps`` steps."""
    return TimeGrid(horizon=float(horizon), n_steps=int(n_steps))


@dataclass(frozen=True)
class NoiseBundle:
    """Per-path driving noise on a grid.

    Attributes:
        grid: the time grid the increments live on.
        seed: master seed; together with a path index it determines the
            path's stream completely.
        brownian_increments: shape (n_paths, n_steps, brownian_dim), each
            entry ~ N(0, dt) i.i.d.
        poisson_counts: shape (n_paths, n_steps) of per-step jump counts,
            or None when the jump rate is zero.
        jump_rate: the per-year jump intensity the counts were drawn with.
        jump_marks: reserved for mark-dependent jumps; always None here
            (jump impact is a fixed multiplier in every supported model).
    """

    grid: TimeGrid
    seed: int
    brownian_increments: np.ndarray
    poisson_counts: np.ndarray | None = None
    jump_rate: float = 0.0
    jump_marks: None = field(default=None, repr=False)

    @property
    def n_paths(self) -> int:
        return self.brownian_increments.shape[0]


def _path_generators(seed: int, i: int) -> tuple[Generator, Generator]:
    """Two independent generators for path ``i``: (brownian, poisson).

    Pure function of (seed, i): a Philox root keyed on the seed is jumped
    2i / 2i+1 counter blocks, so streams never overlap across paths or
    components.
    """
    root = Philox(SeedSequence(seed))
    return Generator(root.jumped(2 * i)), Generator(root.jumped(2 * i + 1))


def _brownian_generator(root: Philox, i: int) -> Generator:
    """Brownian stream for path ``i`` off a shared root (same as above)."""
    return Generator(root.jumped(2 * i))


def _poisson_generator(root: Philox, i: int) -> Generator:
    """Poisson stream for path ``i`` off a shared root (same as above)."""
    return Generator(root.jumped(2 * i + 1))


def sample_noise(
    grid: TimeGrid,
    n_paths: int,
    brownian_dim: int = 1,
    jump_rate: float = 0.0,
    seed: int = 0,
) -> NoiseBundle:
    """Draw Brownian increments (and Poisson counts) for ``n_paths`` paths.

    Path ``i``'s draws depend only on ``(seed, i)`` and the grid, never on
    ``n_paths``: sampling 10 paths then 10_000 paths reproduces the first 10
    rows bit-for-bit.

    Args:
        grid: time grid; increments have variance ``grid.dt``.
        n_paths: number of paths, >= 1.
        brownian_dim: dimension of the driving Brownian motion.
        jump_rate: Poisson intensity per year; 0 disables the jump component.
        seed: master seed.

    Raises:
        ValueError: on non-positive path counts/dimensions or negative rate.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if brownian_dim < 1:
        raise ValueError(f"brownian_dim must be >= 1, got {brownian_dim}")
    if jump_rate < 0.0:
        raise ValueError(f"jump_rate must be >= 0, got {jump_rate}")

    n = grid.n_steps
    sqrt_dt = np.sqrt(grid.dt)
    dw = np.empty((n_paths, n, brownian_dim))
    counts = np.empty((n_paths, n), dtype=np.int64) if jump_rate > 0.0 else None
    lam = jump_rate * grid.dt
    root = Philox(SeedSequence(seed))
    for i in range(n_paths):
        dw[i] = _brownian_generator(root, i).standard_normal((n, brownian_dim))
        if counts is not None:
            counts[i] = _poisson_generator(root, i).poisson(lam, size=n)
    dw *= sqrt_dt
    dw.setflags(write=False)
    if counts is not None:
        counts.setflags(write=False)
    return NoiseBundle(
        grid=grid,
        seed=seed,
        brownian_increments=dw,
        poisson_counts=counts,
        jump_rate=jump_rate,
    )


@dataclass(frozen=True)
class StatePaths:
    """Simulated model paths on the full grid, shape (n_paths, n_steps + 1)."""

    grid: TimeGrid
    values: np.ndarray
    model_tag: str  # one of {"gbm", "vasicek", "jump_gbm", "brownian_arith"}

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]


def _check_noise(grid: TimeGrid, noise: NoiseBundle) -> None:
    if noise.grid != grid:
        raise ValueError("noise was sampled on a different grid")


def simulate_gbm(
    grid: TimeGrid, s0: float, mu: float, sigma: float, noise: NoiseBundle
) -> StatePaths:
    """Exponential model with drift: S_{k+1} = S_k·exp((mu − sigma²/2)dt + sigma·ΔW_k).

    The exact log-Euler update, so every grid marginal is exactly lognormal
    and paths are strictly positive.
    """
    if s0 <= 0.0:
        raise ValueError(f"s0 must be positive, got {s0}")
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    _check_noise(grid, noise)
    dw = noise.brownian_increments[:, :, 0]
    log_increments = (mu - 0.5 * sigma**2) * grid.dt + sigma * dw
    log_paths = np.concatenate(
        [np.zeros((dw.shape[0], 1)), np.cumsum(log_increments, axis=1)], axis=1
    )
    values = s0 * np.exp(log_paths)
    values.setflags(write=False)
    return StatePaths(grid=grid, values=values, model_tag="gbm")


def simulate_vasicek(
    grid: TimeGrid, r0: float, a: float, b: float, sigma: float, noise: NoiseBundle
) -> StatePaths:
    """Mean-reverting rate dr = a(b − r)dt + sigma·dW via its exact transition.

    Per step: r_{k+1} = r_k·e^{−a·dt} + b(1 − e^{−a·dt}) + η_k with
    η_k ~ N(0, sigma²(1 − e^{−2a·dt})/(2a)), built from the same standardized
    draw as the Brownian increment so common-random-number comparisons stay
    aligned.
    """
    if a <= 0.0:
        raise ValueError(f"mean-reversion speed a must be positive, got {a}")
    _check_noise(grid, noise)
    dt = grid.dt
    decay = np.exp(-a * dt)
    step_sd = sigma * np.sqrt((1.0 - np.exp(-2.0 * a * dt)) / (2.0 * a))
    # standardize the N(0, dt) increments back to unit normals
    z = noise.brownian_increments[:, :, 0] / np.sqrt(dt)
    n_paths, n = z.shape
    values = np.empty((n_paths, n + 1))
    values[:, 0] = r0
    for k in range(n):
        values[:, k + 1] = values[:, k] * decay + b * (1.0 - decay) + step_sd * z[:, k]
    values.setflags(write=False)
    return StatePaths(grid=grid, values=values, model_tag="vasicek")


def simulate_jump_gbm(
    grid: TimeGrid, s0: float, mu: float, sigma: float, gamma: float, noise: NoiseBundle
) -> StatePaths:
    """Exponential model with multiplicative jumps.

    S_{t_k} = s0·exp((mu − sigma²/2)t_k + sigma·W_{t_k})·(1 + gamma)^{N_{t_k}},
    i.e. the no-jump exponential scaled by the jump multiplier at every jump.
    With gamma = 0 or no jumps sampled this reproduces ``simulate_gbm`` on the
    same noise bit-for-bit.
    """
    if gamma <= -1.0:
        raise ValueError(f"jump multiplier must exceed -1, got {gamma}")
    base = simulate_gbm(grid, s0, mu, sigma, noise)
    if noise.poisson_counts is None or gamma == 0.0:
        values = base.values
    else:
        n_paths = noise.n_paths
        counts = np.concatenate(
            [
                np.zeros((n_paths, 1), dtype=np.int64),
                np.cumsum(noise.poisson_counts, axis=1),
            ],
            axis=1,
        )
        values = base.values * (1.0 + gamma) ** counts
        values.setflags(write=False)
    return StatePaths(grid=grid, values=values, model_tag="jump_gbm")


@dataclass(frozen=True)
class StoppingSample:
    """First-hitting times on a grid.

    ``hit_index`` is the grid index of tau for hit paths and ``n_steps``
    (the index of T) for paths that never cross before maturity; ``hit`` is
    the indicator {tau < T}, and tau = T exactly on non-hit paths.
    """

    grid: TimeGrid
    tau: np.ndarray
    hit: np.ndarray
    hit_index: np.ndarray

    @property
    def hit_fraction(self) -> float:
        return float(np.mean(self.hit))

    @property
    def n_hit(self) -> int:
        return int(np.sum(self.hit))


def first_hitting(
    process: StatePaths | np.ndarray,
    threshold: float,
    direction: str = ">=",
    grid: TimeGrid | None = None,
) -> StoppingSample:
    """First grid time at which each path satisfies ``value direction threshold``.

    A crossing found only at the final grid point T does not count as a hit
    (the conditioning event is {tau < T}); such paths get tau = T.

    Args:
        process: simulated paths, or a raw (n_paths, n_steps+1) array (pass
            ``grid`` explicitly in that case).
        threshold: the barrier c, in the units of the process.
        direction: ">=" for an upper barrier, "<=" for a lower one.
        grid: required when ``process`` is a bare array.
    """
    if isinstance(process, StatePaths):
        values, grid = process.values, process.grid
    else:
        values = np.asarray(process)
        if grid is None:
            raise ValueError("grid is required when passing a bare array")
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValueError("process must be a non-empty (n_paths, n_steps+1) array")
    if values.shape[1] != grid.n_steps + 1:
        raise ValueError("process shape does not match the grid")
    if direction == ">=":
        crossed = values >= threshold
    elif direction == "<=":
        crossed = values <= threshold
    else:
        raise ValueError(f"direction must be '>=' or '<=', got {direction!r}")

    any_cross = crossed.any(axis=1)
    first = np.where(any_cross, crossed.argmax(axis=1), grid.n_steps)
    hit = any_cross & (first < grid.n_steps)
    hit_index = np.where(hit, first, grid.n_steps)
    tau = np.where(hit, hit_index * grid.dt, grid.horizon)
    return StoppingSample(grid=grid, tau=tau, hit=hit, hit_index=hit_index)
