# %% [markdown]
# # Conditional intensity distribution with a dark current
#
# With a background rate `lambda0 > 0` an event no longer proves the input
# is On, so the filter jumps to a level that depends on where it was.  The
# post-jump level is then a genuine state variable and its stationary law
# has to be solved for.  We compare the solver with a long simulation of
# the filter itself.

# %%
import numpy as np

from bretp import (RandomTelegraphParams, acid, boundary_density, dark_current_model,
                   direct_fixed_point, wasserstein1)
from bretp.mc import empirical_acid

p = RandomTelegraphParams(0.1, 0.1, 1.0, 0.1)
m = dark_current_model(p)
print(f"lower rest point {p.roots[0]:.4f}, jump-map limit {p.f_inf:.4f}")

# %% [markdown]
# ## Boundary density
#
# The discretised inflow operator is left-stochastic, and its fixed point
# carries total mass equal to the mean intensity.

# %%
p0, I = boundary_density(m, cells=400)
print("max column-sum error", np.abs(I.column_sums() - 1).max())
print("fixed-point residual", p0.residual)
print("mass", p0.integral, "vs mean intensity", m.mean_intensity)

# %% [markdown]
# ## Distribution of the intensity at a typical time

# %%
a, _, _ = acid(m, cells=2000, L=12, bins=1000)
emp = empirical_acid(m, T=200.0 + 2e5, burn_in=200.0, sample_dt=1.0, seed=3, edges=a.edges)
print(f"solver mean {a.mean:.4f}  simulation mean {emp.mean:.4f}")
print(f"W1(solver, simulation) = {wasserstein1(a, emp):.5f}")

# %% [markdown]
# The density diverges at the lower rest point, where the filter piles up
# during long silences, and it has a kink where post-jump levels start:
# every jump lands at or above the limit of the jump map.

# %%
edges = np.linspace(p.roots[0], 1.1, 911)
fine, _, _ = acid(m, cells=2000, L=12, edges=edges)
dens = fine.density
print("density in the first three bins:", np.round(dens[:3], 2))
win = (fine.centers > p.roots[0] + 0.1) & (fine.centers < 1.0)
curv = np.abs(np.diff(dens, 2))
print("largest curvature at", fine.centers[1:-1][win[1:-1]][np.argmax(curv[win[1:-1]])])

# %% [markdown]
# ## Direct method
#
# Solving for the intensity law directly agrees away from the singular
# lower edge.

# %%
d = direct_fixed_point(m, grid=1000)
x0 = p.roots[0] + 0.1
x = np.linspace(x0, 1.1, 200)
gap = np.abs((a.cdf(x) - a.cdf(x0)) - (d.cdf(x) - d.cdf(x0))).max()
print(f"largest CDF-increment gap above {x0:.3f}: {gap:.1e}")
