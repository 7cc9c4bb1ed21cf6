"""
Two hypotheses that are hard to tell apart
==========================================

Two regression functions whose thresholds sit a distance apart produce
label laws that differ only slightly after the noise is applied.  The KL
divergence between them, summed over n labels, says how large the
separation can be before n labels suffice to distinguish them.
"""

import math

from berkson import kl_report, make_pair, rate_from_kl

sigma = 0.1
pair = make_pair(k=1, sigma=sigma, a=0.002)
rep = kl_report(pair, n=1000)
print(f"k=1, a=0.002: max gap {rep.gap:.4f} (= 2ac/sigma = {2 * 0.002 * 0.25 / sigma:.4f})")
print(f"  per-label KL max {rep.max_pointwise_kl:.2e}, averaged {rep.integrated_kl:.2e}")
print(f"  n=1000: active bound {rep.active_bound:.3f}, passive bound {rep.passive_bound:.3f}")

# Separation at which the bound reaches 1, against the closed-form scales.
print("\n     n    active a*   sigma/sqrt(n)   passive a*   sqrt(sigma/n)")
for n in (100, 1000, 10_000, 100_000):
    a_act = rate_from_kl(1, sigma, n, "active")
    a_pas = rate_from_kl(1, sigma, n, "passive")
    print(f"{n:6d}   {a_act:.2e}   {sigma / math.sqrt(n):.2e}        {a_pas:.2e}     {math.sqrt(sigma / n):.2e}")
