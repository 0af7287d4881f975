# %% [markdown]
# # Linear and Gamma filters for a fluctuating rate
#
# A Hawkes process is the filter a linear observer would run on a
# Cox process with exponentially correlated intensity.  The Gamma filter
# keeps a mean and a variance and reacts to each event by a Bayesian
# update.  Both are self-exciting, and their intensity laws can be
# compared beyond the first two moments.

# %%
import numpy as np

from bretp import (GammaFilterParams, HawkesParams, acid, gamma_filter_model, hawkes_model,
                   wasserstein1)
from bretp.mc import BirthDeathInput, mc_mi_rate, moment_checks

# %% [markdown]
# ## Same mean and variance, different shapes
#
# Matching mean 2 and variance 1 fixes two of the three Hawkes
# parameters; the decay rate is free.

# %%
acids = {}
for alpha in (0.3, 1.0, 3.0):
    m = hawkes_model(HawkesParams.from_moments(alpha, 2.0, 1.0))
    acids[alpha] = acid(m, cells=200, reps=3)[0]
    print(f"alpha={alpha}: mean {acids[alpha].mean:.4f}  variance {acids[alpha].variance:.4f}")
for a, b in [(0.3, 1.0), (0.3, 3.0), (1.0, 3.0)]:
    print(f"W1({a}, {b}) = {wasserstein1(acids[a], acids[b]):.4f}")

# %% [markdown]
# ## Gamma filter against its linear counterpart

# %%
gm = gamma_filter_model(GammaFilterParams(2.0, 4.0, 0.65, 1.0))
hm = hawkes_model(HawkesParams.from_input(2.0, 4.0, 0.65, 1.0))
edges = np.linspace(0.0, max(gm.acid_range[1], hm.acid_range[1]), 401)
ga = acid(gm, cells=(50, 25), reps=3, edges=edges)[0]
ha = acid(hm, cells=200, reps=3, edges=edges)[0]
print(f"Gamma mean {ga.mean:.3f}, Hawkes mean {ha.mean:.3f}, W1 {wasserstein1(ga, ha):.4f}")

# %% [markdown]
# The Gamma filter's variance estimate and the spread of its mean add up
# to the input variance.

# %%
s = moment_checks(gm, T=50.0, replicates=500, seed=5, burn_in=60.0)
print("E[S] + V[M] = %.3f +- %.3f (input variance 4)" % s.estimates["es_plus_vm"])

# %% [markdown]
# ## Information rate through an approximate filter
#
# For an immigration-death input the log-likelihood ratio against the
# filter intensity estimates the information rate.  A perfect observer of
# the input would reach the Jensen gap of its Poisson law.

# %%
bd = BirthDeathInput(10.0, 1.0, 1.0)
h = mc_mi_rate(bd, 200.0, 1000, seed=2024,
               filter_model=hawkes_model(HawkesParams.from_input(10.0, 10.0, 1.0, 1.0)))
print(f"Hawkes filter {h.value('rate'):.4f} +- {h.se('rate'):.4f}")
print(f"perfect observer {bd.anchor():.4f}")
