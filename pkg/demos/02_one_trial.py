"""
One passive and one active estimate
===================================

The passive learner spreads its budget evenly over the admissible domain
and reads the threshold off a smoothed histogram.  The active learner spends
the same budget in epochs, each on a domain half as wide as the last,
centred on the previous estimate.
"""

from berkson import MarginParams, NoisyOracle, actpass, make_power, widehist

n, sigma, t = 10_000, 0.1, 0.2
m = make_power(MarginParams(k=1, c=0.25, sigma=sigma), t)

# Passive: equispaced queries, one histogram.
oracle = NoisyOracle(m, n, seed=1)
passive = widehist(oracle.passive_batch(n), sigma, k=1, c=0.25, domain=oracle.domain)
print(f"passive: t_hat = {passive.t_hat:.5f}, error = {abs(passive.t_hat - t):.2e}")
print(f"  bin width {passive.bin_width:.4f}, smoothing radius {passive.smoothing_radius:.4f}")

# Active: the same budget, split over ceil(log2(1/sigma)) epochs.
oracle = NoisyOracle(m, n, seed=1)
active = actpass(oracle, n, k=1, c=0.25)
print(f"active:  t_hat = {active.t_hat:.5f}, error = {abs(active.t_hat - t):.2e}")
for ep in active.epochs:
    lo, hi = ep.domain
    print(f"  epoch {ep.e}: domain [{lo:+.4f}, {hi:+.4f}]  t_e = {ep.t_e:+.5f}  ({ep.phase}, {ep.budget} labels)")
