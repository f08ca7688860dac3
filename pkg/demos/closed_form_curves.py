"""Closed-form rate curves for the built-in claims.

The resilience rate is the time derivative of the expected risk evaluation.
For the protective put under a drifting stock and for the zero-coupon bond
under a mean-reverting short rate it has an explicit integral form; for
Gaussian claims under quantile/expected-shortfall evaluations it is fully
elementary. This demo tabulates them and shows the two qualitative facts:
the put's rate is negative (cover decays), the bond's is positive and tends
to the mean short rate at maturity.
"""

import numpy as np

from reslab import (
    BSPutSpec,
    GaussianClaimSpec,
    VasicekBondSpec,
    bs_put_price,
    bs_put_rate_t,
    es_rate,
    var_rate,
    vasicek_rate_t,
)

put = BSPutSpec(s0=1000.0, strike=1000.0, mu=0.10, sigma=0.10, horizon=1.0)
bond = VasicekBondSpec(r0=0.02, a=1.0, b=0.02, sigma=0.01, horizon=1.0)

print(f"put cover today: {bs_put_price(put, 0.0, put.s0):.4f}")
print("   t    put rate [/y]   bond rate [/y]")
for t in np.linspace(0.0, 0.9, 10):
    print(f"{t:5.2f}  {bs_put_rate_t(put, t):13.4f}  {vasicek_rate_t(bond, t):14.6f}")

mean_rate_at_maturity = bond.rate_mean(bond.horizon)
print(f"bond rate near maturity -> {mean_rate_at_maturity:.6f} (mean short rate):")
for k in (2, 4, 6):
    t = 1.0 - 2.0**-k
    err = vasicek_rate_t(bond, t) - mean_rate_at_maturity
    print(f"  T - t = 2^-{k}: error {err:+.2e}")

# Gaussian claim, elementary evaluations: the quantile rate vanishes exactly
# at the median and flips sign around it; expected shortfall is always the
# more conservative (more negative) of the two below the median.
claim = GaussianClaimSpec(x0=0.0, mu_fn=0.05, sigma_fn=0.3, horizon=1.0)
print("alpha   quantile rate   shortfall rate")
for alpha in (0.05, 0.5, 0.95):
    print(
        f"{alpha:5.2f}  {var_rate(claim, 0.25, alpha):14.5f}"
        f"  {es_rate(claim, 0.25, alpha):15.5f}"
    )
