"""
How feature noise reshapes a flat regression function
=====================================================

A margin exponent k > 2 makes m(x) very flat around its threshold.  Adding
uniform noise to the query point averages m over a window of width 2*sigma,
and the averaged curve F rises linearly near t with slope of order
c * sigma^(k-2): for k > 2 the noise makes the threshold *easier* to see.
"""

import numpy as np

from berkson import MarginParams, convolve, local_slope, make_power

# A k = 3 member with threshold 0.2.
m = make_power(MarginParams(k=3, c=0.25, sigma=0.1), t=0.2)

# Compare m and F at a few points near the threshold.
F = convolve(m)
w = np.array([0.15, 0.19, 0.2, 0.21, 0.25])
print("   w      m(w)      F(w)")
for wi, mi, fi in zip(w, m(w), F(w)):
    print(f"{wi:5.2f}  {mi:.6f}  {fi:.6f}")

# The slope of F at the threshold scales like sigma^(k-2).
print("\nsigma   slope of F at t   slope / (c sigma^(k-2))")
for sigma in (0.02, 0.05, 0.1, 0.2):
    Fs = convolve(make_power(MarginParams(k=3, c=0.25, sigma=sigma), 0.2))
    s = local_slope(Fs, sigma / 100)
    print(f"{sigma:5.2f}   {s:15.5f}   {s / (0.25 * sigma):8.3f}")

# For k = 1 the step becomes a ramp of width 2*sigma: noise flattens it instead.
step = convolve(make_power(MarginParams(k=1, c=0.25, sigma=0.1), 0.0))
print("\nk=1 ramp:", np.round(step(np.linspace(-0.15, 0.15, 7)), 4))
