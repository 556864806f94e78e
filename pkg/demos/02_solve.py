# %% [markdown]
# # Solving an IBVP with the Lax-Friedrichs splitting scheme
# Traffic flow on a road fed by a ramp at the left end.

# %%
import numpy as np

from balans.problem import build_grid, catalog, discretize
from balans.scheme import run

p = catalog("lwr-ramp")
grid = build_grid(p, 200)
print(f"N={grid.N} dt={grid.dt:.4g} alpha={grid.alpha:.4g} steps={grid.NT}")

# %%
sol = run(p, grid, discretize(p, grid))
print("global max:", sol.u.max(), "(boundary inflow is capped at 0.4)")

# %%
for n in (0, grid.NT // 2, grid.NT):
    row = sol.u[n]
    print(f"t={grid.times[n]:.3f}  density front at x~{grid.centers[np.argmax(row < 1e-3)]:.3f}")

# %%
# u = t is reproduced to rounding when boundary data are sampled pointwise
q = catalog("advection-x")
g = build_grid(q, 100)
exact = run(q, g, discretize(q, g, boundary="point"))
print("max |u - t| =", np.abs(exact.u - g.times[:, None]).max())
