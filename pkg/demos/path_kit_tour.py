"""Tour of the simulation kit: grids, noise, three models, first hitting.

Everything downstream consumes the same three objects — a TimeGrid, a
NoiseBundle drawn on it, and StatePaths from one of the models — so this
demo builds each once and shows the shapes and a couple of sanity numbers.
"""

import numpy as np

from reslab import (
    first_hitting,
    make_time_grid,
    sample_noise,
    simulate_gbm,
    simulate_jump_gbm,
    simulate_vasicek,
)

grid = make_time_grid(horizon=1.0, n_steps=252)
print(f"grid: {grid.n_steps} steps of dt = {grid.dt:.5f} up to T = {grid.horizon}")

noise = sample_noise(grid, n_paths=20_000, seed=7)
dw = noise.brownian_increments[:, :, 0]
print(
    f"noise: {noise.n_paths} paths; increment variance {dw.var():.6f} "
    f"(dt = {grid.dt:.6f})"
)

stock = simulate_gbm(grid, s0=100.0, mu=0.08, sigma=0.25, noise=noise)
print(
    f"gbm: terminal mean {stock.values[:, -1].mean():8.3f} "
    f"(exact {100 * np.exp(0.08):8.3f})"
)

short_rate = simulate_vasicek(grid, r0=0.01, a=2.0, b=0.04, sigma=0.01, noise=noise)
print(
    f"vasicek: terminal mean {short_rate.values[:, -1].mean():.5f} "
    f"(exact {0.04 + (0.01 - 0.04) * np.exp(-2.0):.5f})"
)

jump_noise = sample_noise(grid, n_paths=20_000, jump_rate=3.0, seed=7)
jumpy = simulate_jump_gbm(
    grid, s0=100.0, mu=0.08, sigma=0.25, gamma=-0.05, noise=jump_noise
)
print(
    f"jump gbm: mean jump count {jump_noise.poisson_counts.sum(axis=1).mean():.3f}, "
    f"terminal mean {jumpy.values[:, -1].mean():7.3f} "
    f"(exact {100 * np.exp(0.08) * np.exp(3.0 * -0.05):7.3f})"
)

# first passage of the stock above 120; crossing only at T does not count
tau = first_hitting(stock, threshold=120.0, direction=">=", grid=grid)
hits = tau.tau[tau.hit]
print(
    f"hitting 120: {tau.hit_fraction:.1%} of paths, "
    f"mean hit time {hits.mean():.3f}, earliest {hits.min():.3f}"
)
