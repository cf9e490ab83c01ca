"""Partition sums whose fiber point is driven by the word itself.

For SYS-B at s = -1 the sequence (1/n) sup_t log Z_n is exactly log(3/4)
for every n; the binned interval program turns grid values into an
upper bound valid on the whole fiber, and Fekete's lemma turns that into
an upper bound for the limit.
"""

import math

from poelab.poe import poe_estimate, product_form_diagnostic, submultiplicativity_check
from poelab.systems import golden_b, sys_a, sys_b

cp = sys_b().combined(-1.0)
est = poe_estimate(cp, n_max=12, grid_log2=8, bins=256)
print(" n   (1/n) sup log Z_n   certified upper / n")
for n, seq, up in zip(est.n_values, est.sequence, est.certified_upper / est.n_values):
    print(f"{n:2d}   {seq:+.10f}      {up:+.10f}")
print("Fekete upper bound:", est.fekete_upper, " log(3/4) =", math.log(0.75))

pairs = [(n, m) for n in range(1, 12) for m in range(n, 12) if n + m <= 12]
rep = submultiplicativity_check(cp, pairs, est=est)
print("log Z_(n+m) <= log Z_n + log Z_m on", len(pairs), "pairs:", rep.passed)

# The weights do not factor over positions: changing two distant symbols
# at once is not the sum of changing each one.
print("interaction, SYS-B:", product_form_diagnostic(cp, 6, math.pi / 4)["interaction"])
print("interaction, SYS-A:", product_form_diagnostic(sys_a().combined(-1.0), 6, math.pi / 4)["interaction"])

# The golden-mean variant has fewer words; the bound moves accordingly.
print("GOLDEN-B Fekete bound:", poe_estimate(golden_b().combined(-1.0), 12, 8, 256).fekete_upper)
