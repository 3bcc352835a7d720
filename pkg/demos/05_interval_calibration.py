"""
How wide should a round's interval be?
======================================

Treating 2000 correlated ticks as independent overstates precision. The
round interval shrinks the sample size to ``n (1 - rho) / (1 + rho)``.
Here we check on simulated AR(1) series that this keeps nominal coverage,
and tabulate the chance threshold used for classification accuracy.
"""

# %%
import numpy as np
from scipy import stats

from convbci.alignment import ar1_mean_ci
from convbci.evaluation import wilson_chance_threshold

rng = np.random.default_rng(0)
n = 2000


def ar1(rho, size):
    e = rng.standard_normal((size, n))
    x = np.empty_like(e)
    x[:, 0] = e[:, 0] / np.sqrt(1 - rho ** 2)
    for i in range(1, n):
        x[:, i] = rho * x[:, i - 1] + e[:, i]
    return x


# %%
for rho in (0.0, 0.5, 0.9, 0.98):
    hits = classical_hits = 0
    for x in ar1(rho, 500):
        s = ar1_mean_ci(x)
        hits += s.ci_lo <= 0 <= s.ci_hi
        half = stats.t.ppf(0.975, n - 1) * x.std(ddof=1) / np.sqrt(n)
        classical_hits += abs(x.mean()) <= half
    print(f"rho {rho:4.2f}: adjusted coverage {hits / 500:.3f}, "
          f"naive coverage {classical_hits / 500:.3f}")

# %%
# Accuracy needed to beat chance at p < 0.05 shrinks with the trial count
for counts in ([20, 20], [86, 85], [200, 200], [1000, 1000]):
    print(counts, round(wilson_chance_threshold(counts), 4))
