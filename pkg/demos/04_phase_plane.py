# %% [markdown]
# # Where to spend a switching-rate budget
#
# The gradient of the telegraph information rate splits the `(k1, k2)`
# plane into three regions by the signs of the two partial derivatives.
# With upper bounds on both rates, the best pair sits on the boundary of
# the feasible box, and which side depends on the region of the corner.

# %%
import numpy as np

from bretp import (constrained_optimum, convexity, diagonal_crossing, nullcline_slope,
                   phase_plane, trace_nullcline)

g = np.linspace(0.05, 1.0, 6)
rep = phase_plane(g, g)
labels = np.array([row[-1] for row in rep.rows()]).reshape(len(g), len(g))
print("rows: k1, columns: k2")
print(labels)

# %% [markdown]
# ## The k1-nullcline
#
# Along the nullcline increasing `k1` does not help.  It crosses the
# diagonal once and rises faster than the diagonal there.

# %%
k = diagonal_crossing()
print(f"crossing at k1 = k2 = {k:.4f}, slope {nullcline_slope(k, k):.3f}")
line = trace_nullcline(1, (k, k), (0.15, 0.4), steps=6)
print(np.round(line, 4))

# %% [markdown]
# The level curves of the k1-derivative bend upward in a band below the
# diagonal, so a cap on `k2` below the crossing favours the On state.

# %%
for a, b in [(0.1, 0.08), (0.2, 0.15), (0.28, 0.25)]:
    print(f"convexity at ({a}, {b}): {convexity(a, b):.3g}")
for r1, r2 in [(1.0, 0.2), (0.1, 0.1), (0.2, 1.0)]:
    opt = constrained_optimum(r1, r2)
    print(f"box ({r1}, {r2}): region {opt['region']}, optimum "
          f"({opt['k1']:.4f}, {opt['k2']:.4f}), rate {opt['rate']:.5f}")
