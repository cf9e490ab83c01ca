"""A cocycle reading one past symbol, and where the variational lower bound breaks.

A_(w_-1, w_0) = R(theta[w_-1]) diag_(w_0). The reduction conjugates it to
a cocycle reading (w_0, w_1) only. For the reduced system the certified
POE upper bound ends up strictly below h(nu) + int phi~ dnu for the
Bernoulli(1/2) measure nu, so the supremum over measures overshoots the
pressure: the lower bound needs a fiber measure invariant under every
F_omega, which this twist does not have. On the diagonal systems the axes
provide one and the two sides meet.
"""

import numpy as np

from poelab.cocycle import PotentialFamily, reduction_residuals, two_sided_reduce
from poelab.poe import CombinedPotential, poe_estimate
from poelab.systems import LOG2, past_twist
from poelab.transfer import Potential
from poelab.variational import exact_extreme_averages

twist = past_twist()
red = two_sided_reduce(twist)
res = reduction_residuals(red)
print("reduced window:", red.reduced.window)
print(f"cohomology residual {res.cohomology:.2e}, past-independence residual {res.past_independence:.2e}")

cp = CombinedPotential(Potential.constant(2, -LOG2), PotentialFamily(red.reduced), -1.0)
est = poe_estimate(cp, n_max=14, grid_log2=8, bins=2048)
print("certified POE upper bound (Fekete):", est.fekete_upper, "at n =", est.fekete_n)

# Bernoulli(1/2): entropy log 2 plus the maximal instability average,
# computed from exact singular values of long products.
rng = np.random.default_rng(5)
words = rng.integers(0, 2, (64, 4097))
sup_avg, _ = exact_extreme_averages(cp, words, 4096)
value = LOG2 + sup_avg
err = 3 * value.std(ddof=1) / np.sqrt(len(value))
print(f"h(nu) + int phi~ dnu for Bernoulli(1/2): {value.mean():.5f} +- {err:.5f}")
print("variational value exceeds the certified upper bound:", value.mean() - err > est.fekete_upper)
